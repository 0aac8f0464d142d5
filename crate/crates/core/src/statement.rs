//! Statements, claims, interpretations and their canonical byte form.
//!
//! A [`Statement`] is an ordered list of [`Claim`]s. Each claim either names a
//! proposition of the world model directly or points at an ambiguity that an
//! [`InterpretationTable`] resolves into weighted readings. Claims are
//! evaluated one by one, each in the context of the claims before it.
//!
//! The canonical encoding is compact JSON with a fixed field order. It is the
//! byte string that gets signed, and the same schema is used for statement
//! logs (one encoded statement per line).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the sum of interpretation weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum StatementError {
    #[error("statement {0} has no claims")]
    NoClaims(StatementId),
    #[error("caveat scope {start}..{end} exceeds {len} claims")]
    CaveatOutOfRange { start: usize, end: usize, len: usize },
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("no interpretation entry for ambiguity {0}")]
    MissingInterpretationEntry(AmbiguityId),
    #[error("interpretation weights for {id} sum to {sum}")]
    WeightSum { id: AmbiguityId, sum: f64 },
    #[error("malformed statement encoding: {0}")]
    Decode(String),
    #[error("statement bytes are not in canonical form")]
    NonCanonical,
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, ::serde::Serialize, ::serde::Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl ::std::fmt::Display for $name {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.pad(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}
pub(crate) use string_id;

string_id!(
    /// Names one proposition of a world model.
    PropositionId
);
string_id!(
    /// Names an ambiguous phrase whose readings live in an [`InterpretationTable`].
    AmbiguityId
);
string_id!(StatementId);
string_id!(
    /// Speaker identity. Doubles as the system id in the attestation registry.
    AgentId
);
string_id!(ConversationId);

/// How strongly a claim is put forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfidenceLevel {
    Confident,
    /// The speaker assigns probability `p` to the claim holding.
    Probabilistic { p: f64 },
    Unconfident,
}

impl ConfidenceLevel {
    pub fn probabilistic(p: f64) -> Result<Self, StatementError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self::Probabilistic { p })
        } else {
            Err(StatementError::InvalidProbability(p))
        }
    }

    pub fn probability(&self) -> Option<f64> {
        match self {
            Self::Probabilistic { p } => Some(*p),
            _ => None,
        }
    }
}

/// What a claim is about: a concrete proposition, or an ambiguous reference.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimTarget {
    Proposition(PropositionId),
    Ambiguous(AmbiguityId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub target: ClaimTarget,
    /// The truth value the speaker asserts for the target.
    pub polarity: bool,
    pub confidence: ConfidenceLevel,
    /// Claims about the speaker itself ("I was not misleading you").
    pub self_regarding: bool,
}

impl Claim {
    pub fn asserting(proposition: impl Into<PropositionId>, polarity: bool) -> Self {
        Self {
            target: ClaimTarget::Proposition(proposition.into()),
            polarity,
            confidence: ConfidenceLevel::Confident,
            self_regarding: false,
        }
    }

    pub fn ambiguous(id: impl Into<AmbiguityId>, polarity: bool) -> Self {
        Self {
            target: ClaimTarget::Ambiguous(id.into()),
            polarity,
            confidence: ConfidenceLevel::Confident,
            self_regarding: false,
        }
    }

    pub fn with_confidence(mut self, confidence: ConfidenceLevel) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn self_regarding(mut self) -> Self {
        self.self_regarding = true;
        self
    }

    pub fn proposition(&self) -> Option<&PropositionId> {
        match &self.target {
            ClaimTarget::Proposition(p) => Some(p),
            ClaimTarget::Ambiguous(_) => None,
        }
    }

    /// The same claim, re-targeted at one concrete reading.
    pub fn resolved(&self, proposition: &PropositionId) -> Claim {
        Claim {
            target: ClaimTarget::Proposition(proposition.clone()),
            ..self.clone()
        }
    }

    /// Fixed template text for the claim. Word metrics tokenize this on
    /// whitespace, so every claim renders to at least three words.
    pub fn render(&self) -> String {
        let subject = match &self.target {
            ClaimTarget::Proposition(p) => p.as_str(),
            ClaimTarget::Ambiguous(a) => a.as_str(),
        };
        let verdict = if self.polarity { "true" } else { "false" };
        match self.confidence {
            ConfidenceLevel::Confident => format!("{subject} is {verdict}"),
            ConfidenceLevel::Probabilistic { p } => {
                format!("{subject} is {verdict} with probability {p}")
            }
            ConfidenceLevel::Unconfident => format!("{subject} is perhaps {verdict}"),
        }
    }

    pub fn word_count(&self) -> usize {
        self.render().split_whitespace().count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaveatKind {
    Fiction,
    Caveat,
}

/// Half-open range `start..end` of claim indices covered by a caveat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaveatScope {
    pub kind: CaveatKind,
    pub start: usize,
    pub end: usize,
}

impl CaveatScope {
    pub fn covers(&self, index: usize) -> bool {
        (self.start..self.end).contains(&index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub id: StatementId,
    pub speaker: AgentId,
    /// Logical tick at which the statement was made.
    pub timestamp: u64,
    pub claims: Vec<Claim>,
    pub context: ConversationId,
    pub caveat_scope: Option<CaveatScope>,
}

impl Statement {
    pub fn new(
        id: impl Into<StatementId>,
        speaker: impl Into<AgentId>,
        timestamp: u64,
        context: impl Into<ConversationId>,
        claims: Vec<Claim>,
    ) -> Self {
        Self {
            id: id.into(),
            speaker: speaker.into(),
            timestamp,
            claims,
            context: context.into(),
            caveat_scope: None,
        }
    }

    pub fn with_caveat(mut self, scope: CaveatScope) -> Self {
        self.caveat_scope = Some(scope);
        self
    }

    pub fn validate(&self) -> Result<(), StatementError> {
        if self.claims.is_empty() {
            return Err(StatementError::NoClaims(self.id.clone()));
        }
        if let Some(scope) = self.caveat_scope {
            if scope.start > scope.end || scope.end > self.claims.len() {
                return Err(StatementError::CaveatOutOfRange {
                    start: scope.start,
                    end: scope.end,
                    len: self.claims.len(),
                });
            }
        }
        for claim in &self.claims {
            if let ConfidenceLevel::Probabilistic { p } = claim.confidence {
                if !(0.0..=1.0).contains(&p) {
                    return Err(StatementError::InvalidProbability(p));
                }
            }
        }
        Ok(())
    }

    pub fn is_exempt(&self, index: usize) -> bool {
        self.caveat_scope.is_some_and(|s| s.covers(index))
    }

    pub fn word_count(&self) -> usize {
        self.claims.iter().map(Claim::word_count).sum()
    }
}

/// The claims preceding a claim within its statement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextSlice<'a> {
    pub preceding: &'a [Claim],
}

impl ContextSlice<'_> {
    pub const EMPTY: ContextSlice<'static> = ContextSlice { preceding: &[] };
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitClaim<'a> {
    pub index: usize,
    pub claim: &'a Claim,
    pub context: ContextSlice<'a>,
    /// Covered by a fiction or caveat marker, so not evaluated for truth.
    pub exempt: bool,
}

/// One entry per claim, in order, each paired with the claims before it.
pub fn split_claims(statement: &Statement) -> Vec<SplitClaim<'_>> {
    statement
        .claims
        .iter()
        .enumerate()
        .map(|(index, claim)| SplitClaim {
            index,
            claim,
            context: ContextSlice {
                preceding: &statement.claims[..index],
            },
            exempt: statement.is_exempt(index),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpretation {
    pub proposition: PropositionId,
    pub weight: f64,
}

/// Scenario-supplied readings for each ambiguous phrase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterpretationTable {
    entries: BTreeMap<AmbiguityId, Vec<Interpretation>>,
}

impl InterpretationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds readings for `id`; the weights must sum to one.
    pub fn insert(
        &mut self,
        id: impl Into<AmbiguityId>,
        readings: Vec<Interpretation>,
    ) -> Result<(), StatementError> {
        let id = id.into();
        check_weights(&id, &readings)?;
        self.entries.insert(id, readings);
        Ok(())
    }

    pub fn get(&self, id: &AmbiguityId) -> Option<&[Interpretation]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AmbiguityId, &[Interpretation])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn validate(&self) -> Result<(), StatementError> {
        self.entries
            .iter()
            .try_for_each(|(id, readings)| check_weights(id, readings))
    }
}

fn check_weights(id: &AmbiguityId, readings: &[Interpretation]) -> Result<(), StatementError> {
    for r in readings {
        if !(0.0..=1.0).contains(&r.weight) {
            return Err(StatementError::InvalidProbability(r.weight));
        }
    }
    let sum: f64 = readings.iter().map(|r| r.weight).sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(StatementError::WeightSum {
            id: id.clone(),
            sum,
        });
    }
    Ok(())
}

/// The weighted readings of a claim. Unambiguous claims have exactly one,
/// with weight 1.
pub fn enumerate_interpretations(
    claim: &Claim,
    table: &InterpretationTable,
) -> Result<Vec<Interpretation>, StatementError> {
    match &claim.target {
        ClaimTarget::Proposition(p) => Ok(vec![Interpretation {
            proposition: p.clone(),
            weight: 1.0,
        }]),
        ClaimTarget::Ambiguous(id) => table
            .get(id)
            .map(<[Interpretation]>::to_vec)
            .ok_or_else(|| StatementError::MissingInterpretationEntry(id.clone())),
    }
}

/// Compact JSON, fields in declaration order, UTF-8, no whitespace.
pub fn canonical_encode(statement: &Statement) -> Vec<u8> {
    serde_json::to_vec(statement).expect("statement serialization is infallible")
}

/// Inverse of [`canonical_encode`]. Rejects well-formed JSON that is not in
/// canonical form, so every accepted byte string has exactly one statement.
pub fn canonical_decode(bytes: &[u8]) -> Result<Statement, StatementError> {
    let statement: Statement =
        serde_json::from_slice(bytes).map_err(|e| StatementError::Decode(e.to_string()))?;
    statement.validate()?;
    if canonical_encode(&statement) != bytes {
        return Err(StatementError::NonCanonical);
    }
    Ok(statement)
}

/// Parses a statement log: one canonically encoded statement per line.
pub fn read_statement_log(text: &str) -> Result<Vec<Statement>, StatementError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| canonical_decode(l.trim_end().as_bytes()))
        .collect()
}

pub fn write_statement_log<'a>(statements: impl IntoIterator<Item = &'a Statement>) -> String {
    let mut out = String::new();
    for s in statements {
        out.push_str(std::str::from_utf8(&canonical_encode(s)).expect("json is utf-8"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weather() -> Statement {
        Statement::new(
            "s1",
            "agent-a",
            3,
            "conv-1",
            vec![
                Claim::asserting("rain_new_york", true),
                Claim::asserting("rain_san_francisco", false),
            ],
        )
    }

    #[test]
    fn compound_statement_splits_in_order() {
        let s = weather();
        let parts = split_claims(&s);
        assert_eq!(parts.len(), 2);
        assert!(parts[0].context.preceding.is_empty());
        assert_eq!(parts[1].context.preceding, &s.claims[..1]);
        assert_eq!(parts[1].claim, &s.claims[1]);
        assert!(parts.iter().all(|p| !p.exempt));
    }

    #[test]
    fn singleton_has_empty_context() {
        let s = Statement::new("s", "a", 0, "c", vec![Claim::asserting("p", true)]);
        let parts = split_claims(&s);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].context, ContextSlice::EMPTY);
    }

    #[test]
    fn fiction_caveat_exempts_covered_claims() {
        let s = Statement::new(
            "s",
            "a",
            0,
            "c",
            vec![
                Claim::asserting("dragons_exist", true),
                Claim::asserting("dragons_breathe_fire", true),
                Claim::asserting("moon_is_cheese", true),
            ],
        )
        .with_caveat(CaveatScope {
            kind: CaveatKind::Fiction,
            start: 0,
            end: 3,
        });
        s.validate().unwrap();
        let parts = split_claims(&s);
        assert_eq!(parts.len(), 3);
        assert!(parts.iter().all(|p| p.exempt));
    }

    #[test]
    fn validation_catches_malformed_statements() {
        let empty = Statement::new("s", "a", 0, "c", vec![]);
        assert!(matches!(empty.validate(), Err(StatementError::NoClaims(_))));
        let bad_scope = weather().with_caveat(CaveatScope {
            kind: CaveatKind::Caveat,
            start: 1,
            end: 3,
        });
        assert!(matches!(
            bad_scope.validate(),
            Err(StatementError::CaveatOutOfRange { .. })
        ));
        assert!(ConfidenceLevel::probabilistic(1.5).is_err());
    }

    #[test]
    fn everest_has_two_readings() {
        let mut table = InterpretationTable::new();
        table
            .insert(
                "everest_biggest",
                vec![
                    Interpretation {
                        proposition: "everest_tallest".into(),
                        weight: 0.7,
                    },
                    Interpretation {
                        proposition: "everest_largest_volume".into(),
                        weight: 0.3,
                    },
                ],
            )
            .unwrap();
        let claim = Claim::ambiguous("everest_biggest", true);
        let readings = enumerate_interpretations(&claim, &table).unwrap();
        assert_eq!(readings.len(), 2);
        assert_eq!(readings[0].proposition.as_str(), "everest_tallest");
    }

    #[test]
    fn unambiguous_claim_has_unit_weight() {
        let claim = Claim::asserting("p", true);
        let readings = enumerate_interpretations(&claim, &InterpretationTable::new()).unwrap();
        assert_eq!(
            readings,
            vec![Interpretation {
                proposition: "p".into(),
                weight: 1.0
            }]
        );
    }

    #[test]
    fn table_weights_returned_unchanged() {
        let readings = vec![
            Interpretation {
                proposition: "a".into(),
                weight: 0.6,
            },
            Interpretation {
                proposition: "b".into(),
                weight: 0.4,
            },
        ];
        let mut table = InterpretationTable::new();
        table.insert("amb", readings.clone()).unwrap();
        let got = enumerate_interpretations(&Claim::ambiguous("amb", true), &table).unwrap();
        assert_eq!(got, readings);
        assert_eq!(got[0].weight + got[1].weight, 1.0);
    }

    #[test]
    fn missing_entry_and_bad_weights_are_errors() {
        let table = InterpretationTable::new();
        assert_eq!(
            enumerate_interpretations(&Claim::ambiguous("x", true), &table),
            Err(StatementError::MissingInterpretationEntry("x".into()))
        );
        let mut table = InterpretationTable::new();
        let err = table.insert(
            "y",
            vec![Interpretation {
                proposition: "a".into(),
                weight: 0.9,
            }],
        );
        assert!(matches!(err, Err(StatementError::WeightSum { .. })));
    }

    #[test]
    fn encoding_is_deterministic_and_round_trips() {
        let s = weather();
        let a = canonical_encode(&s);
        let b = canonical_encode(&s);
        assert_eq!(a, b);
        assert_eq!(canonical_decode(&a).unwrap(), s);
        assert!(!a.contains(&b' '));
    }

    #[test]
    fn confidence_change_changes_bytes() {
        let s = weather();
        let mut t = s.clone();
        t.claims[1].confidence = ConfidenceLevel::Unconfident;
        let (a, b) = (canonical_encode(&s), canonical_encode(&t));
        assert_ne!(a, b);
        let first_diff = a.iter().zip(&b).position(|(x, y)| x != y).unwrap();
        assert!(first_diff > 0);
    }

    #[test]
    fn decode_rejects_non_canonical_whitespace() {
        let s = weather();
        let pretty = serde_json::to_vec_pretty(&s).unwrap();
        assert_eq!(canonical_decode(&pretty), Err(StatementError::NonCanonical));
    }

    #[test]
    fn statement_log_round_trips() {
        let s = weather();
        let mut t = weather();
        t.id = "s2".into();
        let log = write_statement_log([&s, &t]);
        assert_eq!(log.lines().count(), 2);
        assert_eq!(read_statement_log(&log).unwrap(), vec![s, t]);
    }

    #[test]
    fn every_claim_renders_at_least_three_words() {
        for c in [
            ConfidenceLevel::Confident,
            ConfidenceLevel::Unconfident,
            ConfidenceLevel::Probabilistic { p: 0.25 },
        ] {
            assert!(Claim::asserting("p", false).with_confidence(c).word_count() >= 3);
        }
    }
}

//! Post-deployment adjudication of reported statements.
//!
//! A [`Court`] holds one case per reported statement. Each case runs through a
//! cascade of evaluation tiers, cheapest first, and stops at the first tier
//! whose score is outside that tier's uncertainty band. Closed cases can be
//! reopened with new evidence; a verdict that flips from negligent to not
//! negligent emits a [`CaseEvent::PenaltyReversal`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attestation::{AttestationError, Registry, SignedStatement};
use crate::evaluation::{AccuracyScore, EvaluationError, PipelineConfig};
use crate::statement::{InterpretationTable, Statement, StatementId};
use crate::world::{WorldModel, WorldPatch};

#[derive(Debug, Error, PartialEq)]
pub enum AdjudicationError {
    #[error(transparent)]
    Attestation(#[from] AttestationError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("unknown case {0}")]
    UnknownCase(CaseId),
    #[error("case {case} is {status:?}")]
    WrongStatus { case: CaseId, status: CaseStatus },
    #[error("invalid tier configuration: {0}")]
    InvalidTiers(String),
    #[error("invalid sanction policy: {0}")]
    InvalidPolicy(String),
}

crate::statement::string_id!(CaseId);

/// Closed interval of scores considered too uncertain to decide on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Band {
    fn default() -> Self {
        Self { lo: 0.35, hi: 0.65 }
    }
}

impl Band {
    pub fn contains(&self, score: f64) -> bool {
        self.lo <= score && score <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    pub name: String,
    pub pipeline: PipelineConfig,
    pub cost: u64,
    /// `None` only on the last tier, which always decides.
    #[serde(default)]
    pub band: Option<Band>,
}

impl Tier {
    pub fn screening(name: impl Into<String>, pipeline: PipelineConfig, cost: u64) -> Self {
        Self {
            name: name.into(),
            pipeline,
            cost,
            band: Some(Band::default()),
        }
    }

    pub fn conclusive(name: impl Into<String>, pipeline: PipelineConfig, cost: u64) -> Self {
        Self {
            name: name.into(),
            pipeline,
            cost,
            band: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TierConfig {
    pub tiers: Vec<Tier>,
}

impl TierConfig {
    pub fn new(tiers: Vec<Tier>) -> Result<Self, AdjudicationError> {
        let cfg = Self { tiers };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A single conclusive tier.
    pub fn single(pipeline: PipelineConfig, cost: u64) -> Self {
        Self {
            tiers: vec![Tier::conclusive("full", pipeline, cost)],
        }
    }

    pub fn validate(&self) -> Result<(), AdjudicationError> {
        let bad = |m: String| Err(AdjudicationError::InvalidTiers(m));
        let Some((last, rest)) = self.tiers.split_last() else {
            return bad("no tiers".into());
        };
        if last.band.is_some() {
            return bad(format!("final tier {} has an uncertainty band", last.name));
        }
        for t in rest {
            match t.band {
                None => return bad(format!("tier {} has no uncertainty band", t.name)),
                Some(b) if !(0.0 <= b.lo && b.lo <= b.hi && b.hi <= 1.0) => {
                    return bad(format!("tier {} band [{}, {}]", t.name, b.lo, b.hi))
                }
                _ => {}
            }
        }
        if self.tiers.windows(2).any(|w| w[0].cost >= w[1].cost) {
            return bad("tier costs must strictly increase".into());
        }
        for t in &self.tiers {
            t.pipeline.validate()?;
        }
        Ok(())
    }

    pub fn full_cost(&self) -> u64 {
        self.tiers.iter().map(|t| t.cost).sum()
    }

    pub fn final_cost(&self) -> u64 {
        self.tiers.last().map_or(0, |t| t.cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierResult {
    /// 1-based.
    pub tier: usize,
    pub accuracy: AccuracyScore,
    pub benchmark: AccuracyScore,
    pub negligent: bool,
    pub escalated: bool,
    pub cost: u64,
    pub evidence_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub negligent: bool,
    pub severity: f64,
    /// 1-based index of the deciding tier.
    pub tier_reached: usize,
    /// The deciding score is strictly between 0 and 1.
    pub provisional: bool,
    pub evidence_version: u32,
    pub accuracy: AccuracyScore,
    pub cost: u64,
}

impl Verdict {
    /// Equality on everything except `evidence_version`.
    pub fn same_ruling(&self, other: &Verdict) -> bool {
        Verdict {
            evidence_version: 0,
            ..self.clone()
        } == Verdict {
            evidence_version: 0,
            ..other.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "tier", rename_all = "snake_case")]
pub enum CaseStatus {
    Open,
    TierDone(usize),
    Closed,
    Reopened,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: CaseId,
    pub reported: SignedStatement,
    pub reporter: String,
    pub status: CaseStatus,
    pub evidence_version: u32,
    history: Vec<TierResult>,
    verdicts: Vec<Verdict>,
    /// Sanction currently in force.
    pub sanction: Option<Sanction>,
}

impl Case {
    pub fn statement(&self) -> &Statement {
        &self.reported.statement
    }

    pub fn history(&self) -> &[TierResult] {
        &self.history
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn verdict(&self) -> Option<&Verdict> {
        self.verdicts.last()
    }
}

/// Piecewise-linear penalty schedule over severity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanctionPolicy {
    /// `(severity, penalty)` knots; the first is `(0, 0)`. Penalty is flat
    /// after the last knot.
    pub schedule: Vec<(f64, f64)>,
    pub revoke_threshold: f64,
    #[serde(default = "default_interim")]
    pub interim_fraction: f64,
}

fn default_interim() -> f64 {
    0.5
}

impl Default for SanctionPolicy {
    fn default() -> Self {
        Self {
            schedule: vec![(0.0, 0.0), (0.25, 1.0), (0.5, 4.0), (1.0, 16.0)],
            revoke_threshold: 0.8,
            interim_fraction: 0.5,
        }
    }
}

impl SanctionPolicy {
    pub fn validate(&self) -> Result<(), AdjudicationError> {
        let bad = |m: &str| Err(AdjudicationError::InvalidPolicy(m.into()));
        if self.schedule.first() != Some(&(0.0, 0.0)) {
            return bad("schedule must start at (0, 0)");
        }
        if self
            .schedule
            .windows(2)
            .any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1)
        {
            return bad("schedule must be non-decreasing with increasing knots");
        }
        if !(0.0..=1.0).contains(&self.interim_fraction) {
            return bad("interim fraction outside [0, 1]");
        }
        Ok(())
    }

    pub fn penalty_at(&self, severity: f64) -> f64 {
        let s = &self.schedule;
        for w in s.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if severity <= x1 {
                if severity <= x0 {
                    return y0;
                }
                return y0 + (y1 - y0) * (severity - x0) / (x1 - x0);
            }
        }
        s.last().map_or(0.0, |k| k.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sanction {
    pub penalty: f64,
    /// Issued on a provisional verdict at the interim fraction.
    pub interim: bool,
    pub revocation_signal: bool,
}

pub fn apply_sanction(verdict: &Verdict, policy: &SanctionPolicy) -> Sanction {
    if !verdict.negligent {
        return Sanction {
            penalty: 0.0,
            interim: verdict.provisional,
            revocation_signal: false,
        };
    }
    let full = policy.penalty_at(verdict.severity);
    Sanction {
        penalty: if verdict.provisional {
            full * policy.interim_fraction
        } else {
            full
        },
        interim: verdict.provisional,
        revocation_signal: verdict.severity >= policy.revoke_threshold,
    }
}

/// Audit record; [`Court::export_history`] writes one per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum CaseEvent {
    Opened {
        case: CaseId,
        statement: StatementId,
        reporter: String,
    },
    TierRun {
        case: CaseId,
        result: TierResult,
    },
    VerdictReached {
        case: CaseId,
        verdict: Verdict,
    },
    SanctionApplied {
        case: CaseId,
        sanction: Sanction,
    },
    Reopened {
        case: CaseId,
        evidence_version: u32,
    },
    PenaltyReversal {
        case: CaseId,
        evidence_version: u32,
        reversed: Option<Sanction>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Court {
    pub world: WorldModel,
    pub table: InterpretationTable,
    pub tiers: TierConfig,
    cases: BTreeMap<CaseId, Case>,
    by_statement: BTreeMap<StatementId, CaseId>,
    events: Vec<CaseEvent>,
}

impl Court {
    pub fn new(
        world: WorldModel,
        table: InterpretationTable,
        tiers: TierConfig,
    ) -> Result<Self, AdjudicationError> {
        tiers.validate()?;
        Ok(Self {
            world,
            table,
            tiers,
            cases: BTreeMap::new(),
            by_statement: BTreeMap::new(),
            events: Vec::new(),
        })
    }

    pub fn case(&self, id: &CaseId) -> Result<&Case, AdjudicationError> {
        self.cases
            .get(id)
            .ok_or_else(|| AdjudicationError::UnknownCase(id.clone()))
    }

    fn case_mut(&mut self, id: &CaseId) -> Result<&mut Case, AdjudicationError> {
        self.cases
            .get_mut(id)
            .ok_or_else(|| AdjudicationError::UnknownCase(id.clone()))
    }

    pub fn cases(&self) -> impl Iterator<Item = &Case> {
        self.cases.values()
    }

    pub fn events(&self) -> &[CaseEvent] {
        &self.events
    }

    /// Opens a case, or returns the existing one for an already reported
    /// statement id. The signature must verify against the registry.
    pub fn open_case(
        &mut self,
        signed: &SignedStatement,
        reporter: &str,
        registry: &Registry,
    ) -> Result<CaseId, AdjudicationError> {
        registry.verify_signed(signed)?;
        if let Some(id) = self.by_statement.get(&signed.statement.id) {
            return Ok(id.clone());
        }
        let id = CaseId::new(format!("case-{}", self.cases.len() + 1));
        self.cases.insert(
            id.clone(),
            Case {
                id: id.clone(),
                reported: signed.clone(),
                reporter: reporter.to_owned(),
                status: CaseStatus::Open,
                evidence_version: 0,
                history: Vec::new(),
                verdicts: Vec::new(),
                sanction: None,
            },
        );
        self.by_statement
            .insert(signed.statement.id.clone(), id.clone());
        self.events.push(CaseEvent::Opened {
            case: id.clone(),
            statement: signed.statement.id.clone(),
            reporter: reporter.to_owned(),
        });
        Ok(id)
    }

    pub fn run_cascade(&mut self, id: &CaseId) -> Result<Verdict, AdjudicationError> {
        let case = self.case(id)?;
        if !matches!(case.status, CaseStatus::Open | CaseStatus::Reopened) {
            return Err(AdjudicationError::WrongStatus {
                case: id.clone(),
                status: case.status,
            });
        }
        let version = case.evidence_version;
        let (results, verdict) =
            cascade(case.statement(), &self.world, &self.table, &self.tiers, version)?;
        let case = self.case_mut(id)?;
        for r in &results {
            case.status = CaseStatus::TierDone(r.tier);
            case.history.push(r.clone());
        }
        case.status = CaseStatus::Closed;
        case.verdicts.push(verdict.clone());
        self.events.extend(results.into_iter().map(|result| CaseEvent::TierRun {
            case: id.clone(),
            result,
        }));
        self.events.push(CaseEvent::VerdictReached {
            case: id.clone(),
            verdict: verdict.clone(),
        });
        Ok(verdict)
    }

    /// Applies `patch` to the court's world, reopens the case and reruns the
    /// cascade.
    pub fn reevaluate(&mut self, id: &CaseId, patch: &WorldPatch) -> Result<Verdict, AdjudicationError> {
        let case = self.case(id)?;
        if case.status != CaseStatus::Closed {
            return Err(AdjudicationError::WrongStatus {
                case: id.clone(),
                status: case.status,
            });
        }
        let was_negligent = case.verdict().is_some_and(|v| v.negligent);
        self.world.apply(patch);
        let case = self.case_mut(id)?;
        case.evidence_version += 1;
        case.status = CaseStatus::Reopened;
        let version = case.evidence_version;
        self.events.push(CaseEvent::Reopened {
            case: id.clone(),
            evidence_version: version,
        });
        let verdict = self.run_cascade(id)?;
        if was_negligent && !verdict.negligent {
            let reversed = self.case_mut(id)?.sanction.take();
            self.events.push(CaseEvent::PenaltyReversal {
                case: id.clone(),
                evidence_version: version,
                reversed,
            });
        }
        Ok(verdict)
    }

    /// Sanctions the case's current verdict; replaces any earlier sanction.
    pub fn sanction(&mut self, id: &CaseId, policy: &SanctionPolicy) -> Result<Sanction, AdjudicationError> {
        let case = self.case_mut(id)?;
        let Some(verdict) = case.verdicts.last() else {
            return Err(AdjudicationError::WrongStatus {
                case: id.clone(),
                status: case.status,
            });
        };
        let sanction = apply_sanction(verdict, policy);
        case.sanction = Some(sanction.clone());
        self.events.push(CaseEvent::SanctionApplied {
            case: id.clone(),
            sanction: sanction.clone(),
        });
        Ok(sanction)
    }

    /// Line-delimited JSON, one [`CaseEvent`] per line.
    pub fn export_history(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serialization is infallible"));
            out.push('\n');
        }
        out
    }

    pub fn reversal_count(&self, id: &CaseId) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, CaseEvent::PenaltyReversal { case, .. } if case == id))
            .count()
    }
}

/// Runs the tiers on one statement without any case bookkeeping.
pub fn cascade(
    statement: &Statement,
    world: &WorldModel,
    table: &InterpretationTable,
    tiers: &TierConfig,
    evidence_version: u32,
) -> Result<(Vec<TierResult>, Verdict), AdjudicationError> {
    let mut results = Vec::new();
    let mut cost = 0;
    for (i, tier) in tiers.tiers.iter().enumerate() {
        let eval = tier.pipeline.bind(world, table).evaluate_statement(statement)?;
        let (accuracy, benchmark, severity) = match eval.worst() {
            Some(w) => (w.accuracy, w.benchmark, w.severity),
            None => (AccuracyScore::TRUE, AccuracyScore::TRUE, 0.0),
        };
        let negligent = eval.is_negligent();
        let escalated = tier.band.is_some_and(|b| b.contains(accuracy.value()));
        cost += tier.cost;
        results.push(TierResult {
            tier: i + 1,
            accuracy,
            benchmark,
            negligent,
            escalated,
            cost: tier.cost,
            evidence_version,
        });
        if !escalated {
            let v = accuracy.value();
            let verdict = Verdict {
                negligent,
                severity,
                tier_reached: i + 1,
                provisional: v > 0.0 && v < 1.0,
                evidence_version,
                accuracy,
                cost,
            };
            return Ok((results, verdict));
        }
    }
    unreachable!("validated tier configs end with a conclusive tier")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attestation::{sign_statement, KeyPair};
    use crate::evaluation::EvaluatorConfig;
    use crate::statement::{Claim, ConfidenceLevel};

    fn setup() -> (Registry, KeyPair, Court) {
        let key = KeyPair::from_seed([3; 32]);
        let mut reg = Registry::new();
        reg.register("bot".into(), key.public_key()).unwrap();
        let world = WorldModel::from_truths([("sky_blue", true), ("moon_cheese", false)]);
        let tiers = TierConfig::new(vec![
            Tier::screening("cheap", PipelineConfig::faithful(), 1),
            Tier::conclusive("full", PipelineConfig::faithful(), 10),
        ])
        .unwrap();
        let court = Court::new(world, InterpretationTable::new(), tiers).unwrap();
        (reg, key, court)
    }

    fn said(id: &str, claim: Claim) -> Statement {
        Statement::new(id, "bot", 1, "conv", vec![claim])
    }

    #[test]
    fn tampered_statement_is_refused() {
        let (reg, key, mut court) = setup();
        let mut signed = sign_statement(&key, &said("s1", Claim::asserting("sky_blue", true)));
        signed.statement.claims[0].polarity = false;
        assert!(matches!(
            court.open_case(&signed, "user", &reg),
            Err(AdjudicationError::Attestation(AttestationError::SignatureInvalid(_)))
        ));
    }

    #[test]
    fn duplicate_reports_share_a_case() {
        let (reg, key, mut court) = setup();
        let signed = sign_statement(&key, &said("s1", Claim::asserting("sky_blue", true)));
        let a = court.open_case(&signed, "u1", &reg).unwrap();
        let b = court.open_case(&signed, "u2", &reg).unwrap();
        assert_eq!(a, b);
        assert_eq!(court.cases().count(), 1);
    }

    #[test]
    fn confident_truth_stops_at_first_tier() {
        let (reg, key, mut court) = setup();
        let signed = sign_statement(&key, &said("s1", Claim::asserting("sky_blue", true)));
        let id = court.open_case(&signed, "u", &reg).unwrap();
        let v = court.run_cascade(&id).unwrap();
        assert_eq!(v.tier_reached, 1);
        assert!(!v.negligent);
        assert!(!v.provisional);
        assert_eq!(v.cost, 1);
        assert_eq!(court.case(&id).unwrap().status, CaseStatus::Closed);
    }

    #[test]
    fn in_band_score_escalates() {
        let (reg, key, mut court) = setup();
        let claim = Claim::asserting("sky_blue", true)
            .with_confidence(ConfidenceLevel::probabilistic(0.5).unwrap());
        // Fidelity 0.2 scores a true claim at 0.6.
        court.tiers.tiers[0].pipeline.ground_truth = EvaluatorConfig {
            fidelity: 0.2,
            ..EvaluatorConfig::faithful()
        };
        let signed = sign_statement(&key, &said("s1", claim));
        let id = court.open_case(&signed, "u", &reg).unwrap();
        let v = court.run_cascade(&id).unwrap();
        assert_eq!(v.tier_reached, 2);
        assert_eq!(v.cost, 11);
        assert_eq!(court.case(&id).unwrap().history().len(), 2);
    }

    #[test]
    fn reevaluation_reverses_penalty_once() {
        let (reg, key, mut court) = setup();
        let signed = sign_statement(&key, &said("s1", Claim::asserting("moon_cheese", true)));
        let id = court.open_case(&signed, "u", &reg).unwrap();
        let v = court.run_cascade(&id).unwrap();
        assert!(v.negligent);
        let s = court.sanction(&id, &SanctionPolicy::default()).unwrap();
        assert_eq!(s.penalty, 16.0);
        assert!(s.revocation_signal);

        let v2 = court.reevaluate(&id, &WorldPatch::set("moon_cheese", true)).unwrap();
        assert!(!v2.negligent);
        assert_eq!(v2.evidence_version, 1);
        assert_eq!(court.reversal_count(&id), 1);
        assert_eq!(court.case(&id).unwrap().sanction, None);

        let v3 = court.reevaluate(&id, &WorldPatch::default()).unwrap();
        assert!(v3.same_ruling(&v2));
        assert_eq!(v3.evidence_version, 2);
        assert_eq!(court.reversal_count(&id), 1);
    }

    #[test]
    fn reevaluate_requires_closed_case() {
        let (reg, key, mut court) = setup();
        let signed = sign_statement(&key, &said("s1", Claim::asserting("sky_blue", true)));
        let id = court.open_case(&signed, "u", &reg).unwrap();
        assert!(court.reevaluate(&id, &WorldPatch::default()).is_err());
    }

    #[test]
    fn history_export_is_one_event_per_line() {
        let (reg, key, mut court) = setup();
        let signed = sign_statement(&key, &said("s1", Claim::asserting("sky_blue", true)));
        let id = court.open_case(&signed, "u", &reg).unwrap();
        court.run_cascade(&id).unwrap();
        let text = court.export_history();
        assert_eq!(text.lines().count(), court.events().len());
        for line in text.lines() {
            serde_json::from_str::<CaseEvent>(line).unwrap();
        }
    }

    #[test]
    fn sanction_table() {
        let p = SanctionPolicy::default();
        p.validate().unwrap();
        let verdict = |negligent, severity, provisional| Verdict {
            negligent,
            severity,
            tier_reached: 1,
            provisional,
            evidence_version: 0,
            accuracy: AccuracyScore::FALSE,
            cost: 1,
        };
        assert_eq!(apply_sanction(&verdict(false, 1.0, false), &p).penalty, 0.0);
        let s = apply_sanction(&verdict(true, 1.0, false), &p);
        assert!(s.penalty > 0.0 && s.revocation_signal);
        let interim = apply_sanction(&verdict(true, 0.5, true), &p);
        assert_eq!(interim.penalty, 2.0);
        assert!(interim.interim);
        assert_eq!(p.penalty_at(0.0), 0.0);
        assert_eq!(p.penalty_at(0.375), 2.5);
    }

    #[test]
    fn tier_config_rules() {
        let f = PipelineConfig::faithful;
        assert!(TierConfig::new(vec![]).is_err());
        assert!(TierConfig::new(vec![Tier::screening("a", f(), 1)]).is_err());
        assert!(TierConfig::new(vec![
            Tier::screening("a", f(), 5),
            Tier::conclusive("b", f(), 5)
        ])
        .is_err());
        assert!(TierConfig::new(vec![
            Tier::conclusive("a", f(), 1),
            Tier::conclusive("b", f(), 5)
        ])
        .is_err());
    }
}

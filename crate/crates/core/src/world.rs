//! Ground-truth world, agent belief stores, speaking policies and the three
//! trace predicates (truthful, honest, undeluded).
//!
//! An agent answers a prompt by picking the polarity to assert. Two forces
//! act on that choice: `truth_weight` pulls toward what the agent believes,
//! and `selection_power` pulls toward whichever polarity the agent's payoff
//! table rewards. The belief side wins with probability
//! `logistic(truth_weight + selection_power * (reward(belief) - reward(!belief)))`.
//! An infinite truth weight always reports the belief; zero on both axes is
//! an even coin (babble).

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::statement::{
    AgentId, Claim, ConfidenceLevel, ConversationId, PropositionId, Statement, StatementId,
};

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("unknown proposition {0}")]
    UnknownProposition(PropositionId),
    #[error("{field} = {value} is out of range")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("trace timestamps must strictly increase ({previous} then {next})")]
    NonIncreasingTimestamp { previous: u64, next: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub truths: BTreeMap<PropositionId, bool>,
    /// Base rates for propositions that evaluators judge probabilistically.
    #[serde(default)]
    pub frequencies: BTreeMap<PropositionId, f64>,
}

impl WorldModel {
    pub fn from_truths<I, P>(truths: I) -> Self
    where
        I: IntoIterator<Item = (P, bool)>,
        P: Into<PropositionId>,
    {
        Self {
            truths: truths.into_iter().map(|(p, v)| (p.into(), v)).collect(),
            frequencies: BTreeMap::new(),
        }
    }

    pub fn truth(&self, p: &PropositionId) -> Option<bool> {
        self.truths.get(p).copied()
    }

    pub fn contains(&self, p: &PropositionId) -> bool {
        self.truths.contains_key(p)
    }

    pub fn require(&self, p: &PropositionId) -> Result<bool, WorldError> {
        self.truth(p)
            .ok_or_else(|| WorldError::UnknownProposition(p.clone()))
    }

    /// Probability that `p` has truth value `polarity`: the base rate if one
    /// is declared, otherwise 1 or 0 from the truth table.
    pub fn probability(&self, p: &PropositionId, polarity: bool) -> Option<f64> {
        if let Some(&f) = self.frequencies.get(p) {
            return Some(if polarity { f } else { 1.0 - f });
        }
        self.truth(p).map(|t| if t == polarity { 1.0 } else { 0.0 })
    }

    pub fn propositions(&self) -> impl Iterator<Item = &PropositionId> {
        self.truths.keys()
    }

    pub fn apply(&mut self, patch: &WorldPatch) {
        for (p, v) in &patch.truths {
            self.truths.insert(p.clone(), *v);
        }
        for (p, f) in &patch.frequencies {
            self.frequencies.insert(p.clone(), *f);
        }
    }

    pub fn patched(&self, patch: &WorldPatch) -> Self {
        let mut w = self.clone();
        w.apply(patch);
        w
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        for (p, &f) in &self.frequencies {
            if !self.truths.contains_key(p) {
                return Err(WorldError::UnknownProposition(p.clone()));
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(WorldError::OutOfRange {
                    field: "frequency",
                    value: f,
                });
            }
        }
        Ok(())
    }
}

/// New evidence about the world.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldPatch {
    #[serde(default)]
    pub truths: BTreeMap<PropositionId, bool>,
    #[serde(default)]
    pub frequencies: BTreeMap<PropositionId, f64>,
}

impl WorldPatch {
    pub fn set(p: impl Into<PropositionId>, value: bool) -> Self {
        let mut patch = Self::default();
        patch.truths.insert(p.into(), value);
        patch
    }

    pub fn is_empty(&self) -> bool {
        self.truths.is_empty() && self.frequencies.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BeliefStore {
    pub beliefs: BTreeMap<PropositionId, bool>,
    /// Probability the agent assigns to its belief; 1 when absent.
    #[serde(default)]
    pub confidence: BTreeMap<PropositionId, f64>,
}

impl BeliefStore {
    /// The world's truth table with every proposition in `delusions` flipped.
    pub fn from_world(world: &WorldModel, delusions: &BTreeSet<PropositionId>) -> Self {
        let beliefs = world
            .truths
            .iter()
            .map(|(p, &t)| (p.clone(), t ^ delusions.contains(p)))
            .collect();
        Self {
            beliefs,
            confidence: BTreeMap::new(),
        }
    }

    pub fn believes(&self, p: &PropositionId) -> Option<bool> {
        self.beliefs.get(p).copied()
    }

    pub fn confidence(&self, p: &PropositionId) -> f64 {
        self.confidence.get(p).copied().unwrap_or(1.0)
    }

    pub fn set(&mut self, p: PropositionId, value: bool, confidence: Option<f64>) {
        match confidence {
            Some(c) => {
                self.confidence.insert(p.clone(), c);
            }
            None => {
                self.confidence.remove(&p);
            }
        }
        self.beliefs.insert(p, value);
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        for &c in self.confidence.values() {
            if !(0.0..=1.0).contains(&c) {
                return Err(WorldError::OutOfRange {
                    field: "confidence",
                    value: c,
                });
            }
        }
        Ok(())
    }
}

/// How an agent phrases ordinary (non-probability) answers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimStyle {
    #[default]
    Confident,
    Unconfident,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPolicy {
    /// Pull toward asserting beliefs. `"inf"` in files means always truthful
    /// to belief.
    #[serde(with = "extended_f64")]
    pub truth_weight: f64,
    /// Strength of strategic selection toward rewarded assertions.
    #[serde(default, with = "extended_f64")]
    pub selection_power: f64,
    #[serde(default)]
    pub delusion_map: BTreeSet<PropositionId>,
    #[serde(default)]
    pub defend_mistakes: bool,
    #[serde(default)]
    pub decline_rate: f64,
    /// Probability that an answer comes out flipped by accident.
    #[serde(default)]
    pub mistake_rate: f64,
    #[serde(default)]
    pub style: ClaimStyle,
}

impl AgentPolicy {
    pub fn always_truthful() -> Self {
        Self {
            truth_weight: f64::INFINITY,
            selection_power: 0.0,
            delusion_map: BTreeSet::new(),
            defend_mistakes: false,
            decline_rate: 0.0,
            mistake_rate: 0.0,
            style: ClaimStyle::Confident,
        }
    }

    pub fn strategic(selection_power: f64) -> Self {
        Self {
            truth_weight: 0.0,
            selection_power,
            ..Self::always_truthful()
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let checks = [
            ("truth_weight", self.truth_weight, self.truth_weight >= 0.0),
            (
                "selection_power",
                self.selection_power,
                self.selection_power >= 0.0,
            ),
            (
                "decline_rate",
                self.decline_rate,
                (0.0..=1.0).contains(&self.decline_rate),
            ),
            (
                "mistake_rate",
                self.mistake_rate,
                (0.0..=1.0).contains(&self.mistake_rate),
            ),
        ];
        for (field, value, ok) in checks {
            if !ok {
                return Err(WorldError::OutOfRange { field, value });
            }
        }
        Ok(())
    }

    /// Statements from this policy count as lies: no pull toward truth and
    /// selection power above the scenario's threshold.
    pub fn emits_lies(&self, selection_threshold: f64) -> bool {
        self.truth_weight == 0.0 && self.selection_power > selection_threshold
    }
}

/// Reward for asserting a given polarity of a proposition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<PayoffEntry>", into = "Vec<PayoffEntry>")]
pub struct PayoffTable {
    rewards: BTreeMap<(PropositionId, bool), f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffEntry {
    pub proposition: PropositionId,
    pub polarity: bool,
    pub reward: f64,
}

impl From<Vec<PayoffEntry>> for PayoffTable {
    fn from(entries: Vec<PayoffEntry>) -> Self {
        let mut t = PayoffTable::default();
        for e in entries {
            t.set(e.proposition, e.polarity, e.reward);
        }
        t
    }
}

impl From<PayoffTable> for Vec<PayoffEntry> {
    fn from(t: PayoffTable) -> Self {
        t.rewards
            .into_iter()
            .map(|((proposition, polarity), reward)| PayoffEntry {
                proposition,
                polarity,
                reward,
            })
            .collect()
    }
}

impl PayoffTable {
    pub fn set(&mut self, p: impl Into<PropositionId>, polarity: bool, reward: f64) {
        self.rewards.insert((p.into(), polarity), reward);
    }

    pub fn reward(&self, p: &PropositionId, polarity: bool) -> f64 {
        self.rewards
            .get(&(p.clone(), polarity))
            .copied()
            .unwrap_or(0.0)
    }

    /// The rewarded polarity, if the two polarities pay differently.
    pub fn preferred(&self, p: &PropositionId) -> Option<bool> {
        let (t, f) = (self.reward(p, true), self.reward(p, false));
        (t != f).then_some(t > f)
    }

    pub fn propositions(&self) -> BTreeSet<&PropositionId> {
        self.rewards.keys().map(|(p, _)| p).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentModel {
    pub id: AgentId,
    pub policy: AgentPolicy,
    pub beliefs: BeliefStore,
    #[serde(default)]
    pub payoffs: PayoffTable,
    /// Whether evaluators may inspect the belief store.
    #[serde(default = "default_true")]
    pub belief_access: bool,
}

fn default_true() -> bool {
    true
}

impl AgentModel {
    /// An agent whose beliefs are the world with its delusions flipped.
    pub fn from_world(id: impl Into<AgentId>, policy: AgentPolicy, world: &WorldModel) -> Self {
        let beliefs = BeliefStore::from_world(world, &policy.delusion_map);
        Self {
            id: id.into(),
            policy,
            beliefs,
            payoffs: PayoffTable::default(),
            belief_access: true,
        }
    }

    pub fn with_payoffs(mut self, payoffs: PayoffTable) -> Self {
        self.payoffs = payoffs;
        self
    }

    /// SHA-256 over the canonical JSON of policy, beliefs and payoffs.
    pub fn policy_hash(&self) -> String {
        let body = serde_json::to_vec(&(&self.policy, &self.beliefs, &self.payoffs))
            .expect("agent serialization is infallible");
        hex::encode(Sha256::digest(body))
    }

    /// What the agent believes about `p`; falls back to the world with the
    /// delusion map applied when the store has no entry.
    pub fn belief(&self, p: &PropositionId, world: &WorldModel) -> Result<bool, WorldError> {
        if let Some(b) = self.beliefs.believes(p) {
            return Ok(b);
        }
        Ok(world.require(p)? ^ self.policy.delusion_map.contains(p))
    }

    /// Probability of asserting the believed polarity of `p`.
    pub fn belief_report_probability(&self, p: &PropositionId, belief: bool) -> f64 {
        let policy = &self.policy;
        if policy.truth_weight.is_infinite() {
            return 1.0;
        }
        let gain = self.payoffs.reward(p, belief) - self.payoffs.reward(p, !belief);
        let pull = if gain == 0.0 {
            0.0
        } else {
            policy.selection_power * gain
        };
        logistic(policy.truth_weight + pull)
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub proposition: PropositionId,
    /// Ask for a probability instead of a plain answer.
    #[serde(default)]
    pub elicit_probability: bool,
}

impl Prompt {
    pub fn ask(p: impl Into<PropositionId>) -> Self {
        Self {
            proposition: p.into(),
            elicit_probability: false,
        }
    }

    pub fn probability(p: impl Into<PropositionId>) -> Self {
        Self {
            proposition: p.into(),
            elicit_probability: true,
        }
    }
}

/// Where and when an answer is given.
#[derive(Debug, Clone, PartialEq)]
pub struct StepContext {
    pub tick: u64,
    pub conversation: ConversationId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Utterance {
    Statement(Statement),
    Decline,
}

impl Utterance {
    pub fn statement(&self) -> Option<&Statement> {
        match self {
            Utterance::Statement(s) => Some(s),
            Utterance::Decline => None,
        }
    }
}

/// Polarity choice for one prompt. Consumes exactly three draws from `rng`
/// (decline, selection, accident) whatever the outcome, so streams stay
/// aligned across policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub declined: bool,
    pub belief: bool,
    pub asserted: bool,
    pub accident: bool,
}

pub fn choose<R: Rng + ?Sized>(
    agent: &AgentModel,
    p: &PropositionId,
    world: &WorldModel,
    rng: &mut R,
) -> Result<Choice, WorldError> {
    let belief = agent.belief(p, world)?;
    let u_decline: f64 = rng.gen();
    let u_select: f64 = rng.gen();
    let u_accident: f64 = rng.gen();
    let selected = if u_select < agent.belief_report_probability(p, belief) {
        belief
    } else {
        !belief
    };
    let accident = u_accident < agent.policy.mistake_rate;
    Ok(Choice {
        declined: u_decline < agent.policy.decline_rate,
        belief,
        asserted: selected ^ accident,
        accident,
    })
}

/// The claim an agent makes when asserting `polarity` for a prompt.
pub fn phrase(agent: &AgentModel, prompt: &Prompt, polarity: bool) -> Claim {
    let confidence = if prompt.elicit_probability {
        ConfidenceLevel::Probabilistic {
            p: agent.beliefs.confidence(&prompt.proposition),
        }
    } else {
        match agent.policy.style {
            ClaimStyle::Confident => ConfidenceLevel::Confident,
            ClaimStyle::Unconfident => ConfidenceLevel::Unconfident,
        }
    };
    Claim::asserting(prompt.proposition.clone(), polarity).with_confidence(confidence)
}

/// One answer from `agent` to `prompt`.
pub fn agent_step<R: Rng + ?Sized>(
    agent: &AgentModel,
    prompt: &Prompt,
    world: &WorldModel,
    rng: &mut R,
    ctx: &StepContext,
) -> Result<Utterance, WorldError> {
    world.require(&prompt.proposition)?;
    let choice = choose(agent, &prompt.proposition, world, rng)?;
    if choice.declined {
        return Ok(Utterance::Decline);
    }
    Ok(Utterance::Statement(Statement {
        id: StatementId(format!("{}@{}", agent.id, ctx.tick)),
        speaker: agent.id.clone(),
        timestamp: ctx.tick,
        claims: vec![phrase(agent, prompt, choice.asserted)],
        context: ctx.conversation.clone(),
        caveat_scope: None,
    }))
}

/// Statements emitted by one agent and its beliefs at each emission.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub statements: Vec<Statement>,
    pub belief_snapshots: Vec<BeliefStore>,
}

impl Trace {
    pub fn push(&mut self, statement: Statement, beliefs: BeliefStore) -> Result<(), WorldError> {
        if let Some(last) = self.statements.last() {
            if statement.timestamp <= last.timestamp {
                return Err(WorldError::NonIncreasingTimestamp {
                    previous: last.timestamp,
                    next: statement.timestamp,
                });
            }
        }
        self.statements.push(statement);
        self.belief_snapshots.push(beliefs);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

/// Runs `agent` over `prompts` in one conversation, ticks starting at
/// `first_tick`. Declines advance the tick but leave no statement.
pub fn simulate_trace<R: Rng + ?Sized>(
    agent: &AgentModel,
    prompts: &[Prompt],
    world: &WorldModel,
    rng: &mut R,
    conversation: &ConversationId,
    first_tick: u64,
) -> Result<Trace, WorldError> {
    let mut trace = Trace::default();
    for (i, prompt) in prompts.iter().enumerate() {
        let ctx = StepContext {
            tick: first_tick + i as u64,
            conversation: conversation.clone(),
        };
        if let Utterance::Statement(s) = agent_step(agent, prompt, world, rng, &ctx)? {
            trace.push(s, agent.beliefs.clone())?;
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Truthful,
    Honest,
    Undeluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub statement: Option<StatementId>,
    pub claim_index: Option<usize>,
    pub proposition: PropositionId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateReport {
    pub predicate: Predicate,
    /// Claims (or beliefs, for undeluded) that were checked.
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl PredicateReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation_rate(&self) -> Option<f64> {
        (self.checked > 0).then(|| self.violations.len() as f64 / self.checked as f64)
    }

    pub fn propositions(&self) -> BTreeSet<PropositionId> {
        self.violations.iter().map(|v| v.proposition.clone()).collect()
    }
}

/// Checks every stated, non-caveated propositional claim of a trace with
/// `holds(claim, snapshot_index)`.
fn scan_claims(
    trace: &Trace,
    predicate: Predicate,
    mut holds: impl FnMut(&Claim, &PropositionId, usize) -> bool,
) -> PredicateReport {
    let mut report = PredicateReport {
        predicate,
        checked: 0,
        violations: Vec::new(),
    };
    for (i, statement) in trace.statements.iter().enumerate() {
        for (j, claim) in statement.claims.iter().enumerate() {
            let Some(p) = claim.proposition() else { continue };
            if statement.is_exempt(j) {
                continue;
            }
            report.checked += 1;
            if !holds(claim, p, i) {
                report.violations.push(Violation {
                    statement: Some(statement.id.clone()),
                    claim_index: Some(j),
                    proposition: p.clone(),
                });
            }
        }
    }
    report
}

/// Claims that the agent states and the world contradicts.
pub fn check_truthful(trace: &Trace, world: &WorldModel) -> PredicateReport {
    scan_claims(trace, Predicate::Truthful, |claim, p, _| {
        world.truth(p) == Some(claim.polarity)
    })
}

/// Claims that the agent states without believing them at the time.
pub fn check_honest(trace: &Trace) -> PredicateReport {
    scan_claims(trace, Predicate::Honest, |claim, p, i| {
        trace
            .belief_snapshots
            .get(i)
            .and_then(|b| b.believes(p))
            == Some(claim.polarity)
    })
}

/// Beliefs the world contradicts.
pub fn check_undeluded(beliefs: &BeliefStore, world: &WorldModel) -> PredicateReport {
    let mut report = PredicateReport {
        predicate: Predicate::Undeluded,
        checked: 0,
        violations: Vec::new(),
    };
    for (p, &b) in &beliefs.beliefs {
        let Some(t) = world.truth(p) else { continue };
        report.checked += 1;
        if b != t {
            report.violations.push(Violation {
                statement: None,
                claim_index: None,
                proposition: p.clone(),
            });
        }
    }
    report
}

/// Serializes non-finite floats as the strings `"inf"` / `"-inf"`.
pub(crate) mod extended_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;

    fn world(n: usize) -> WorldModel {
        WorldModel::from_truths((0..n).map(|i| (format!("p{i}"), i % 3 != 0)))
    }

    fn ctx(tick: u64) -> StepContext {
        StepContext {
            tick,
            conversation: "c".into(),
        }
    }

    #[test]
    fn always_truthful_asserts_world_truth() {
        let w = world(6);
        let agent = AgentModel::from_world("a", AgentPolicy::always_truthful(), &w);
        let mut rng = stream(1, "t");
        for p in w.propositions() {
            let s = agent_step(&agent, &Prompt::ask(p.clone()), &w, &mut rng, &ctx(1)).unwrap();
            let s = s.statement().unwrap().clone();
            assert_eq!(s.claims[0].proposition(), Some(p));
            assert_eq!(Some(s.claims[0].polarity), w.truth(p));
        }
    }

    #[test]
    fn deluded_honest_agent_reports_false_belief() {
        let w = world(4);
        let mut policy = AgentPolicy::always_truthful();
        policy.delusion_map.insert("p1".into());
        let agent = AgentModel::from_world("a", policy, &w);
        let mut rng = stream(1, "t");
        let u = agent_step(&agent, &Prompt::ask("p1"), &w, &mut rng, &ctx(1)).unwrap();
        assert_eq!(u.statement().unwrap().claims[0].polarity, !w.truth(&"p1".into()).unwrap());
    }

    #[test]
    fn unknown_prompt_is_rejected() {
        let w = world(2);
        let agent = AgentModel::from_world("a", AgentPolicy::always_truthful(), &w);
        let err = agent_step(&agent, &Prompt::ask("nope"), &w, &mut stream(0, "t"), &ctx(0));
        assert_eq!(err, Err(WorldError::UnknownProposition("nope".into())));
    }

    #[test]
    fn fixed_seed_reproduces_statement_sequence() {
        let w = world(50);
        let mut policy = AgentPolicy::strategic(0.0);
        policy.decline_rate = 0.1;
        let agent = AgentModel::from_world("babbler", policy, &w);
        let prompts: Vec<Prompt> = (0..1000).map(|i| Prompt::ask(format!("p{}", i % 50))).collect();
        let run = || {
            simulate_trace(&agent, &prompts, &w, &mut stream(42, "agent"), &"c".into(), 1)
                .unwrap()
        };
        let (a, b) = (run(), run());
        let bytes = |t: &Trace| -> Vec<u8> {
            t.statements
                .iter()
                .flat_map(crate::statement::canonical_encode)
                .collect()
        };
        assert_eq!(bytes(&a), bytes(&b));
        assert!(a.len() < 1000, "decline rate should drop some answers");
    }

    #[test]
    fn declines_follow_decline_rate() {
        let w = world(3);
        let mut policy = AgentPolicy::always_truthful();
        policy.decline_rate = 1.0;
        let agent = AgentModel::from_world("a", policy, &w);
        let u = agent_step(&agent, &Prompt::ask("p0"), &w, &mut stream(0, "t"), &ctx(0)).unwrap();
        assert_eq!(u, Utterance::Decline);
    }

    #[test]
    fn trace_rejects_non_increasing_ticks() {
        let s = |t| Statement::new("s", "a", t, "c", vec![Claim::asserting("p", true)]);
        let mut trace = Trace::default();
        trace.push(s(2), BeliefStore::default()).unwrap();
        assert!(trace.push(s(2), BeliefStore::default()).is_err());
    }

    #[test]
    fn truthful_report_lists_exactly_the_false_claim() {
        let w = world(3);
        let mut trace = Trace::default();
        let beliefs = BeliefStore::from_world(&w, &BTreeSet::new());
        trace
            .push(Statement::new("s1", "a", 1, "c", vec![Claim::asserting("p1", true)]), beliefs.clone())
            .unwrap();
        trace
            .push(Statement::new("s2", "a", 2, "c", vec![Claim::asserting("p0", true)]), beliefs)
            .unwrap();
        let report = check_truthful(&trace, &w);
        assert_eq!(report.checked, 2);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].statement, Some("s2".into()));
        assert_eq!(report.violation_rate(), Some(0.5));
    }

    #[test]
    fn honest_report_catches_asserted_negation_of_belief() {
        let w = world(3);
        let beliefs = BeliefStore::from_world(&w, &BTreeSet::new());
        let mut trace = Trace::default();
        trace
            .push(Statement::new("s1", "a", 1, "c", vec![Claim::asserting("p1", false)]), beliefs)
            .unwrap();
        let report = check_honest(&trace);
        assert_eq!(report.propositions(), BTreeSet::from(["p1".into()]));
    }

    #[test]
    fn undeluded_matches_delusion_map() {
        let w = world(5);
        assert!(check_undeluded(&BeliefStore::from_world(&w, &BTreeSet::new()), &w).holds());
        let delusions = BTreeSet::from(["p3".into()]);
        let report = check_undeluded(&BeliefStore::from_world(&w, &delusions), &w);
        assert_eq!(report.propositions(), delusions);
    }

    #[test]
    fn infinite_truth_weight_survives_json() {
        let policy = AgentPolicy::always_truthful();
        let json = serde_json::to_string(&policy).unwrap();
        assert!(json.contains("\"inf\""));
        let back: AgentPolicy = serde_json::from_str(&json).unwrap();
        assert_eq!(back, policy);
    }

    #[test]
    fn policy_hash_tracks_policy_changes() {
        let w = world(3);
        let a = AgentModel::from_world("a", AgentPolicy::always_truthful(), &w);
        let mut b = a.clone();
        assert_eq!(a.policy_hash(), b.policy_hash());
        b.policy.selection_power = 1.0;
        assert_ne!(a.policy_hash(), b.policy_hash());
    }

    #[test]
    fn strategic_selection_follows_payoffs() {
        let w = world(3);
        let mut payoffs = PayoffTable::default();
        payoffs.set("p1", false, 1.0);
        let agent =
            AgentModel::from_world("liar", AgentPolicy::strategic(100.0), &w).with_payoffs(payoffs);
        assert!(agent.belief_report_probability(&"p1".into(), true) < 1e-40);
        assert_eq!(agent.belief_report_probability(&"p2".into(), true), 0.5);
        assert!(agent.policy.emits_lies(10.0));
    }
}

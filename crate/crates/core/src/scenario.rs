//! Scenario files.
//!
//! A scenario is one JSON document declaring the world, the agents, the
//! evaluation panel, adjudication tiers, certification levels, the relevance
//! graph and a master seed. Loading checks every cross-reference, so a loaded
//! [`Scenario`] never names an undeclared proposition, agent or level.
//!
//! Agent signing keys are derived from the scenario name and agent id, not
//! the run seed, so a registry file stays usable across seeds.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adjudication::{AdjudicationError, SanctionPolicy, TierConfig};
use crate::amplification::{AmplificationConfig, AmplificationError, RelevanceGraph};
use crate::attestation::{DeployerClaim, KeyPair, Registry};
use crate::certification::{CertificationThresholds, Conversation, PromptSpace};
use crate::evaluation::{EvaluationError, EvaluatorConfig, PipelineConfig};
use crate::seed::key_material;
use crate::statement::{AgentId, InterpretationTable, PropositionId, StatementError};
use crate::world::{AgentModel, AgentPolicy, BeliefStore, PayoffTable, WorldError, WorldModel};

/// Environment variable naming the directory searched for scenario files.
pub const SCENARIO_DIR_ENV: &str = "TRUTHCERT_SCENARIO_DIR";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("schema error at {field} (line {line}, column {column}): {message}")]
    Schema {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{context} refers to undeclared {kind} {id}")]
    DanglingReference {
        context: String,
        kind: &'static str,
        id: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl From<WorldError> for ScenarioError {
    fn from(e: WorldError) -> Self {
        ScenarioError::Invalid(e.to_string())
    }
}

impl From<EvaluationError> for ScenarioError {
    fn from(e: EvaluationError) -> Self {
        ScenarioError::Invalid(e.to_string())
    }
}

impl From<StatementError> for ScenarioError {
    fn from(e: StatementError) -> Self {
        ScenarioError::Invalid(e.to_string())
    }
}

impl From<AdjudicationError> for ScenarioError {
    fn from(e: AdjudicationError) -> Self {
        ScenarioError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: AgentId,
    pub policy: AgentPolicy,
    #[serde(default)]
    pub payoffs: PayoffTable,
    /// Overrides the beliefs derived from the world and delusion map.
    #[serde(default)]
    pub beliefs: Option<BeliefStore>,
    #[serde(default = "yes")]
    pub belief_access: bool,
    #[serde(default)]
    pub deployer: Option<DeployerClaim>,
    /// Certification level to apply for; the first declared level if absent.
    #[serde(default)]
    pub level: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivialFact {
    pub proposition: PropositionId,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteSettings {
    pub issued_at: u64,
    pub validity: u64,
    pub worst_case_budget: usize,
    pub bucket_width: f64,
    pub n_min: usize,
    /// Times each proposition is asked in the calibration suite.
    pub calibration_rounds: usize,
    pub amplification: AmplificationConfig,
    pub amplification_budget: usize,
    pub goodhart_factor: usize,
    pub audit_factor: f64,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        Self {
            issued_at: 0,
            validity: 1000,
            worst_case_budget: 200,
            bucket_width: 0.1,
            n_min: 20,
            calibration_rounds: 5,
            amplification: AmplificationConfig::default(),
            amplification_budget: 100,
            goodhart_factor: 10,
            audit_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub world: WorldModel,
    #[serde(default)]
    pub interpretations: InterpretationTable,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    pub tiers: TierConfig,
    #[serde(default)]
    pub sanctions: SanctionPolicy,
    pub levels: BTreeMap<String, CertificationThresholds>,
    #[serde(default)]
    pub relevance: RelevanceGraph,
    pub validation: Vec<Conversation>,
    #[serde(default)]
    pub trivia: Vec<TrivialFact>,
    #[serde(default)]
    pub suites: SuiteSettings,
}

/// A scenario together with the hash of the bytes it was loaded from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub sha256: String,
}

/// Resolves a scenario path. A missing path means `demo.json` in the
/// scenario directory; relative paths that do not exist are retried inside
/// that directory.
pub fn resolve_path(given: Option<&Path>, scenario_dir: Option<&Path>) -> Option<PathBuf> {
    match (given, scenario_dir) {
        (Some(p), dir) => {
            if p.exists() || p.is_absolute() {
                return Some(p.to_path_buf());
            }
            match dir {
                Some(d) if d.join(p).exists() => Some(d.join(p)),
                _ => Some(p.to_path_buf()),
            }
        }
        (None, Some(d)) => Some(d.join("demo.json")),
        (None, None) => None,
    }
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let bytes = std::fs::read(path).map_err(|e| ScenarioError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_scenario(&bytes)
}

pub fn parse_scenario(bytes: &[u8]) -> Result<LoadedScenario, ScenarioError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let mut de = serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Schema {
            field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| ScenarioError::Schema {
        field: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(LoadedScenario {
        scenario,
        sha256: hex::encode(Sha256::digest(bytes)),
    })
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.world.validate()?;
        let world = &self.world;
        let need = |context: String, p: &PropositionId| -> Result<(), ScenarioError> {
            if world.contains(p) {
                Ok(())
            } else {
                Err(ScenarioError::DanglingReference {
                    context,
                    kind: "proposition",
                    id: p.to_string(),
                })
            }
        };

        for (id, readings) in self.interpretations.iter() {
            for r in readings {
                need(format!("interpretation {id}"), &r.proposition)?;
            }
        }
        self.interpretations.validate()?;

        let mut seen = BTreeSet::new();
        for a in &self.agents {
            if !seen.insert(&a.id) {
                return Err(ScenarioError::Invalid(format!("agent {} declared twice", a.id)));
            }
            a.policy.validate()?;
            let ctx = || format!("agent {}", a.id);
            for p in &a.policy.delusion_map {
                need(ctx(), p)?;
            }
            for p in a.payoffs.propositions() {
                need(ctx(), p)?;
            }
            if let Some(b) = &a.beliefs {
                b.validate()?;
                for p in b.beliefs.keys().chain(b.confidence.keys()) {
                    need(ctx(), p)?;
                }
            }
            if let Some(level) = &a.level {
                if !self.levels.contains_key(level) {
                    return Err(ScenarioError::DanglingReference {
                        context: ctx(),
                        kind: "level",
                        id: level.clone(),
                    });
                }
            }
        }
        if self.levels.is_empty() {
            return Err(ScenarioError::Invalid("no certification levels".into()));
        }

        let pipelines = std::iter::once(("pipeline".to_owned(), &self.pipeline)).chain(
            self.tiers
                .tiers
                .iter()
                .map(|t| (format!("tier {}", t.name), &t.pipeline)),
        );
        for (ctx, p) in pipelines {
            p.validate()?;
            let evaluators: Vec<&EvaluatorConfig> =
                std::iter::once(&p.ground_truth).chain(&p.panel).collect();
            for e in evaluators {
                for q in e.blind_spots.iter().chain(e.bias_profile.keys()) {
                    need(ctx.clone(), q)?;
                }
            }
            for q in p.vague_scores.keys() {
                need(ctx.clone(), q)?;
            }
        }
        self.tiers.validate()?;
        self.sanctions.validate()?;

        for l in &self.relevance.links {
            need("relevance graph".into(), &l.a)?;
            need("relevance graph".into(), &l.b)?;
        }
        for n in &self.relevance.nodes {
            need("relevance graph".into(), n)?;
        }
        self.relevance.validate(world).map_err(|e| match e {
            AmplificationError::World(w) => ScenarioError::from(w),
            other => ScenarioError::Invalid(other.to_string()),
        })?;

        for c in &self.validation {
            for prompt in &c.prompts {
                need(format!("conversation {}", c.id), &prompt.proposition)?;
            }
        }
        for t in &self.trivia {
            need("trivia".into(), &t.proposition)?;
            if world.truth(&t.proposition) != Some(t.value) {
                return Err(ScenarioError::Invalid(format!(
                    "trivia fact {} is not true in the world",
                    t.proposition
                )));
            }
        }
        if self.suites.goodhart_factor > 1 && self.trivia.is_empty() {
            return Err(ScenarioError::Invalid("padding needs trivia facts".into()));
        }
        Ok(())
    }

    pub fn agent_spec(&self, id: &AgentId) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| &a.id == id)
    }

    pub fn agent(&self, spec: &AgentSpec) -> AgentModel {
        let mut agent = AgentModel::from_world(spec.id.clone(), spec.policy.clone(), &self.world)
            .with_payoffs(spec.payoffs.clone());
        if let Some(b) = &spec.beliefs {
            agent.beliefs = b.clone();
        }
        agent.belief_access = spec.belief_access;
        agent
    }

    pub fn agents(&self) -> Vec<AgentModel> {
        self.agents.iter().map(|s| self.agent(s)).collect()
    }

    pub fn key_pair(&self, id: &AgentId) -> KeyPair {
        KeyPair::from_seed(key_material(0, &format!("agent-key/{}/{}", self.name, id)))
    }

    pub fn level_of<'a>(&'a self, spec: &'a AgentSpec) -> (&'a str, CertificationThresholds) {
        let name = spec
            .level
            .as_deref()
            .unwrap_or_else(|| self.levels.keys().next().expect("levels checked non-empty"));
        (name, self.levels[name])
    }

    /// A registry with every agent's key and deployer claim, and no
    /// certificates.
    pub fn registry(&self) -> Registry {
        let mut reg = Registry::new();
        for a in &self.agents {
            reg.register(a.id.clone(), self.key_pair(&a.id).public_key())
                .expect("agent ids are unique");
            if let Some(claim) = &a.deployer {
                reg.record_claim(&a.id, claim.clone())
                    .expect("agent was just registered");
            }
        }
        reg
    }

    /// Every world proposition, with `agent`'s payoff propositions marked.
    pub fn prompt_space(&self, agent: &AgentModel) -> PromptSpace {
        PromptSpace {
            propositions: self.world.propositions().cloned().collect(),
            payoff_relevant: agent.payoffs.propositions().into_iter().cloned().collect(),
        }
    }

    /// The relevance graph with every world proposition as a node.
    pub fn full_relevance(&self) -> RelevanceGraph {
        let mut g = self.relevance.clone();
        g.nodes.extend(self.world.propositions().cloned());
        g
    }

    pub fn trivia_pairs(&self) -> Vec<(PropositionId, bool)> {
        self.trivia
            .iter()
            .map(|t| (t.proposition.clone(), t.value))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "mini",
        "seed": 7,
        "world": {"truths": {"a": true, "b": false}},
        "agents": [{"id": "x", "policy": {"truth_weight": "inf"}}],
        "tiers": [{"name": "full", "pipeline": {"panel": [{}]}, "cost": 1}],
        "levels": {"basic": {"max_negligent_per_claim": 0.0, "max_worst_severity": 0.0,
                   "max_calibration_deviation": 0.1, "max_honesty_mismatch_rate": 0.0}},
        "validation": [{"id": "c", "prompts": [{"proposition": "a"}]}],
        "trivia": [{"proposition": "a", "value": true}]
    }"#;

    #[test]
    fn minimal_scenario_loads() {
        let s = parse_scenario(MINIMAL.as_bytes()).unwrap();
        assert_eq!(s.scenario.agents.len(), 1);
        assert_eq!(s.sha256.len(), 64);
    }

    #[test]
    fn dangling_proposition_is_named() {
        let text = MINIMAL.replace(r#""prompts": [{"proposition": "a"}]"#, r#""prompts": [{"proposition": "zz"}]"#);
        match parse_scenario(text.as_bytes()) {
            Err(ScenarioError::DanglingReference { id, kind, .. }) => {
                assert_eq!(id, "zz");
                assert_eq!(kind, "proposition");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_field_path() {
        let text = MINIMAL.replace(r#""seed": 7"#, r#""seed": "seven""#);
        match parse_scenario(text.as_bytes()) {
            Err(ScenarioError::Schema { field, line, .. }) => {
                assert_eq!(field, "seed");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn untrue_trivia_is_rejected() {
        let text = MINIMAL.replace(r#"{"proposition": "a", "value": true}"#, r#"{"proposition": "b", "value": true}"#);
        assert!(matches!(parse_scenario(text.as_bytes()), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn round_trip_is_a_fixpoint() {
        let first = parse_scenario(MINIMAL.as_bytes()).unwrap().scenario;
        let again = parse_scenario(first.to_json().as_bytes()).unwrap().scenario;
        assert_eq!(first, again);
    }

    #[test]
    fn keys_do_not_depend_on_seed() {
        let mut s = parse_scenario(MINIMAL.as_bytes()).unwrap().scenario;
        let k1 = s.key_pair(&"x".into()).public_key();
        s.seed = 99;
        assert_eq!(k1, s.key_pair(&"x".into()).public_key());
    }

    #[test]
    fn resolves_in_scenario_dir() {
        let dir = Path::new("/nonexistent-dir");
        assert_eq!(resolve_path(None, Some(dir)), Some(dir.join("demo.json")));
        assert_eq!(resolve_path(None, None), None);
    }
}

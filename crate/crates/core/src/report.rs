//! Orchestration of the five commands over a loaded scenario, and the
//! reports they produce.
//!
//! Every command draws randomness from its own labelled stream of the master
//! seed (see [`crate::seed`]), so reports are identical across runs with the
//! same scenario and seed. Only `wall_time_ms` varies; compare reports with
//! [`RunReport::without_timing`].

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjudication::{AdjudicationError, CaseId, Court, Sanction, Verdict};
use crate::amplification::{worst_case_amplification_suite, AmplificationError, AmplificationSuiteReport};
use crate::attestation::{sign_statement, AttestationError, CheckReport, Registry, SignedStatement};
use crate::certification::{
    average_case_metrics, calibration_check, certify as certify_results, goodhart_probe, honesty_probe,
    pad_runs, tally_metrics, worst_case_search, CertificationError, CertificationOutcome,
    CertificationRequest, GoodhartFinding, MetricsReport, Suite, SuiteResults,
};
use crate::scenario::{Scenario, ScenarioError};
use crate::seed::stream;
use crate::statement::{AgentId, StatementId};
use crate::world::{
    check_honest, check_truthful, check_undeluded, AgentModel, PredicateReport, Prompt, Trace, WorldError,
};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit codes of the `truthcert` binary.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const IO: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const SCENARIO_SCHEMA: u8 = 3;
    pub const SCENARIO_DANGLING: u8 = 4;
    pub const MODULE: u8 = 5;
    pub const CERTIFICATION_REJECTED: u8 = 6;
    pub const AMPLIFICATION_FAILED: u8 = 7;
    pub const UNTRUSTED: u8 = 8;
    pub const SIGNATURE_INVALID: u8 = 9;
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("world: {0}")]
    World(#[from] WorldError),
    #[error("certification: {0}")]
    Certification(#[from] CertificationError),
    #[error("adjudication: {0}")]
    Adjudication(#[from] AdjudicationError),
    #[error("amplification: {0}")]
    Amplification(#[from] AmplificationError),
    #[error("attestation: {0}")]
    Attestation(#[from] AttestationError),
    #[error("io: {0}")]
    Io(String),
}

impl EngineError {
    pub fn exit_code(&self) -> u8 {
        match self {
            EngineError::Scenario(ScenarioError::DanglingReference { .. }) => exit::SCENARIO_DANGLING,
            EngineError::Scenario(ScenarioError::Io { .. }) | EngineError::Io(_) => exit::IO,
            EngineError::Scenario(_) => exit::SCENARIO_SCHEMA,
            EngineError::Attestation(AttestationError::SignatureInvalid(_)) => exit::SIGNATURE_INVALID,
            _ => exit::MODULE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Adjudicate,
    Certify,
    Amplify,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub engine_version: String,
    pub command: Command,
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    /// Excluded from reproducibility comparisons.
    pub wall_time_ms: Option<u64>,
    pub body: ReportBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportBody {
    Simulate(SimulateReport),
    Certify(CertifyReport),
    Adjudicate(AdjudicateReport),
    Amplify(AmplifyReport),
    Verify(VerifyReport),
}

impl RunReport {
    pub fn new(command: Command, scenario: &Scenario, scenario_hash: &str, seed: u64, body: ReportBody) -> Self {
        Self {
            engine_version: ENGINE_VERSION.to_owned(),
            command,
            scenario: scenario.name.clone(),
            scenario_hash: scenario_hash.to_owned(),
            seed,
            wall_time_ms: None,
            body,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    pub fn without_timing(&self) -> RunReport {
        RunReport {
            wall_time_ms: None,
            ..self.clone()
        }
    }

    /// Exit code implied by the report's outcome.
    pub fn exit_code(&self) -> u8 {
        match &self.body {
            ReportBody::Certify(r) if r.systems.iter().any(|s| s.outcome.certificate().is_none()) => {
                exit::CERTIFICATION_REJECTED
            }
            ReportBody::Amplify(r) if r.systems.iter().any(|s| !s.passed) => exit::AMPLIFICATION_FAILED,
            ReportBody::Verify(r) if !r.check.trusted() => exit::UNTRUSTED,
            ReportBody::Adjudicate(r) if !r.rejected.is_empty() => exit::SIGNATURE_INVALID,
            _ => exit::SUCCESS,
        }
    }

    /// Human-readable table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {:?} on {} (seed {}, scenario {})",
            self.engine_version,
            self.command,
            self.scenario,
            self.seed,
            &self.scenario_hash[..12.min(self.scenario_hash.len())]
        );
        let rate = |r: Option<f64>| r.map_or("-".to_owned(), |v| format!("{v:.4}"));
        match &self.body {
            ReportBody::Simulate(r) => {
                let _ = writeln!(out, "{:<14} {:>6} {:>9} {:>7} {:>9} {:>10}", "system", "stmts", "truthful", "honest", "undeluded", "negl/claim");
                for a in &r.agents {
                    let _ = writeln!(
                        out,
                        "{:<14} {:>6} {:>9} {:>7} {:>9} {:>10}",
                        a.system,
                        a.statements,
                        a.truthful.violations.len(),
                        a.honest.violations.len(),
                        a.undeluded.violations.len(),
                        rate(a.metrics.negligent_per_claim)
                    );
                }
            }
            ReportBody::Certify(r) => {
                let _ = writeln!(out, "{:<14} {:<10} {:<10} failing", "system", "level", "outcome");
                for s in &r.systems {
                    let (outcome, failing) = match &s.outcome {
                        CertificationOutcome::Certified { .. } => ("certified", String::new()),
                        CertificationOutcome::Rejected { failing, .. } => (
                            "rejected",
                            failing.iter().map(|f| format!("{f:?}").to_lowercase()).collect::<Vec<_>>().join(","),
                        ),
                    };
                    let _ = writeln!(out, "{:<14} {:<10} {:<10} {}", s.system, s.level, outcome, failing);
                }
            }
            ReportBody::Adjudicate(r) => {
                let _ = writeln!(out, "{:<8} {:<16} {:>9} {:>8} {:>5} {:>8}", "case", "statement", "negligent", "severity", "tier", "penalty");
                for c in &r.cases {
                    let _ = writeln!(
                        out,
                        "{:<8} {:<16} {:>9} {:>8.4} {:>5} {:>8.2}",
                        c.case,
                        c.statement,
                        c.verdict.negligent,
                        c.verdict.severity,
                        c.verdict.tier_reached,
                        c.sanction.penalty
                    );
                }
                let _ = writeln!(out, "cost {} of {} (full procedure)", r.cascade_cost, r.full_cost);
                for s in &r.revoked {
                    let _ = writeln!(out, "revoked: {s}");
                }
                for rej in &r.rejected {
                    let _ = writeln!(out, "rejected report {}: {}", rej.statement, rej.reason);
                }
            }
            ReportBody::Amplify(r) => {
                let _ = writeln!(out, "{:<14} {:>7} {:>10} {:>8} result", "system", "prompts", "falsehoods", "failures");
                for s in &r.systems {
                    let _ = writeln!(
                        out,
                        "{:<14} {:>7} {:>10} {:>8} {}",
                        s.system,
                        s.prompts_tried,
                        s.falsehoods,
                        s.failures().count(),
                        if s.passed { "pass" } else { "fail" }
                    );
                }
            }
            ReportBody::Verify(r) => {
                for f in &r.findings {
                    let _ = writeln!(out, "{} {}", if f.passed { "ok  " } else { "FAIL" }, f.check);
                }
            }
        }
        out
    }
}

fn selected(scenario: &Scenario, system: Option<&AgentId>) -> Result<Vec<AgentModel>, EngineError> {
    match system {
        None => Ok(scenario.agents()),
        Some(id) => {
            let spec = scenario.agent_spec(id).ok_or_else(|| ScenarioError::DanglingReference {
                context: "--system".into(),
                kind: "agent",
                id: id.to_string(),
            })?;
            Ok(vec![scenario.agent(spec)])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSimulation {
    pub system: AgentId,
    pub policy_hash: String,
    pub prompts: usize,
    pub statements: usize,
    pub truthful: PredicateReport,
    pub honest: PredicateReport,
    pub undeluded: PredicateReport,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub agents: Vec<AgentSimulation>,
}

/// Runs each agent over the validation conversations. Also returns every
/// statement, signed with its speaker's key.
pub fn simulate(
    scenario: &Scenario,
    seed: u64,
    system: Option<&AgentId>,
) -> Result<(SimulateReport, Vec<SignedStatement>), EngineError> {
    let pipeline = scenario.pipeline.bind(&scenario.world, &scenario.interpretations);
    let mut agents = Vec::new();
    let mut signed = Vec::new();
    for agent in selected(scenario, system)? {
        let mut rng = stream(seed, &format!("simulate/{}", agent.id));
        let run = average_case_metrics(&agent, &scenario.validation, &pipeline, &mut rng)?;
        let mut trace = Trace::default();
        let key = scenario.key_pair(&agent.id);
        for s in run.runs.iter().flat_map(|r| r.statements()) {
            trace.push(s.clone(), agent.beliefs.clone())?;
            signed.push(sign_statement(&key, s));
        }
        agents.push(AgentSimulation {
            system: agent.id.clone(),
            policy_hash: agent.policy_hash(),
            prompts: run.runs.iter().map(|r| r.answers.len()).sum(),
            statements: trace.len(),
            truthful: check_truthful(&trace, &scenario.world),
            honest: check_honest(&trace),
            undeluded: check_undeluded(&agent.beliefs, &scenario.world),
            metrics: run.report,
        });
    }
    Ok((SimulateReport { agents }, signed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationSummary {
    pub passed: bool,
    pub falsehoods: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemCertification {
    pub system: AgentId,
    pub level: String,
    pub policy_hash: String,
    pub results: SuiteResults,
    pub goodhart: Option<GoodhartFinding>,
    pub amplification: Option<AmplificationSummary>,
    pub honesty_note: Option<String>,
    pub outcome: CertificationOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub suites: BTreeSet<Suite>,
    pub systems: Vec<SystemCertification>,
}

/// Runs the requested suites on each selected agent and issues certificates
/// into `registry` for the ones that pass.
pub fn certify(
    scenario: &Scenario,
    seed: u64,
    system: Option<&AgentId>,
    suites: &BTreeSet<Suite>,
    registry: &mut Registry,
) -> Result<CertifyReport, EngineError> {
    let settings = &scenario.suites;
    let pipeline = scenario.pipeline.bind(&scenario.world, &scenario.interpretations);
    let all_props: Vec<Prompt> = scenario.world.propositions().map(|p| Prompt::ask(p.clone())).collect();
    let mut systems = Vec::new();
    for agent in selected(scenario, system)? {
        let id = &agent.id;
        let label = |suite: &str| format!("certify/{suite}/{id}");
        let mut results = SuiteResults::default();
        let mut goodhart = None;
        let mut amplification = None;
        let mut honesty_note = None;
        if suites.contains(&Suite::Average) {
            let run = average_case_metrics(&agent, &scenario.validation, &pipeline, &mut stream(seed, &label("average")))?;
            if settings.goodhart_factor > 1 {
                let padded = pad_runs(&run.runs, &scenario.trivia_pairs(), settings.goodhart_factor);
                let padded = tally_metrics(id, &padded, &pipeline)?;
                goodhart = Some(goodhart_probe(&run.report, &padded));
            }
            results.average = Some(run.report);
        }
        if suites.contains(&Suite::Worst) {
            results.worst = Some(worst_case_search(
                &agent,
                &scenario.prompt_space(&agent),
                settings.worst_case_budget,
                &pipeline,
                &mut stream(seed, &label("worst")),
            )?);
        }
        if suites.contains(&Suite::Calibration) {
            let prompts: Vec<Prompt> = (0..settings.calibration_rounds)
                .flat_map(|_| all_props.iter().cloned())
                .collect();
            results.calibration = Some(calibration_check(
                &agent,
                &prompts,
                &scenario.world,
                settings.bucket_width,
                settings.n_min,
                &mut stream(seed, &label("calibration")),
            )?);
        }
        if suites.contains(&Suite::Honesty) {
            match honesty_probe(&agent, &all_props, &scenario.world, &mut stream(seed, &label("honesty"))) {
                Ok(r) => results.honesty = Some(r),
                Err(e @ CertificationError::BeliefAccessDenied(_)) => honesty_note = Some(e.to_string()),
                Err(e) => return Err(e.into()),
            }
        }
        if suites.contains(&Suite::Amplification) {
            let r = worst_case_amplification_suite(
                &agent,
                &scenario.prompt_space(&agent),
                settings.amplification_budget,
                &scenario.full_relevance(),
                &settings.amplification,
                &pipeline,
                &mut stream(seed, &label("amplification")),
            )?;
            results.amplification = Some(r.passed);
            amplification = Some(AmplificationSummary {
                passed: r.passed,
                falsehoods: r.falsehoods,
                failures: r.failures().count(),
            });
        }
        let spec = scenario.agent_spec(id).expect("selected agents come from the scenario");
        let (level, thresholds) = scenario.level_of(spec);
        let request = CertificationRequest {
            system: id.clone(),
            level: level.to_owned(),
            thresholds,
            suites: suites.clone(),
            issued_at: settings.issued_at,
            validity: settings.validity,
            public_key: registry.entry(id)?.active_key,
            policy_hash: agent.policy_hash(),
        };
        let outcome = certify_results(&request, &results);
        if let Some(cert) = outcome.certificate() {
            if registry.certificate(&cert.id).is_none() {
                registry.issue(cert.clone())?;
            }
        }
        systems.push(SystemCertification {
            system: id.clone(),
            level: level.to_owned(),
            policy_hash: agent.policy_hash(),
            results,
            goodhart,
            amplification,
            honesty_note,
            outcome,
        });
    }
    Ok(CertifyReport {
        suites: suites.clone(),
        systems,
    })
}

/// One line of a reports file: a signed statement and who reported it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    #[serde(default = "anonymous")]
    pub reporter: String,
    #[serde(flatten)]
    pub signed: SignedStatement,
}

fn anonymous() -> String {
    "anonymous".into()
}

pub fn read_reports(text: &str) -> Result<Vec<ReportLine>, EngineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| EngineError::Io(format!("reports line {}: {e}", i + 1))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: CaseId,
    pub statement: StatementId,
    pub speaker: AgentId,
    pub verdict: Verdict,
    pub sanction: Sanction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedReport {
    pub statement: StatementId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjudicateReport {
    pub cases: Vec<CaseSummary>,
    pub rejected: Vec<RejectedReport>,
    pub revoked: Vec<AgentId>,
    pub cascade_cost: u64,
    /// Cost had every case run every tier.
    pub full_cost: u64,
    pub history_events: usize,
}

/// Opens, decides and sanctions a case per report. Revocation signals revoke
/// the speaker's certificates in `registry`.
pub fn adjudicate(
    scenario: &Scenario,
    reports: &[ReportLine],
    registry: &mut Registry,
) -> Result<(AdjudicateReport, Court), EngineError> {
    let mut court = Court::new(
        scenario.world.clone(),
        scenario.interpretations.clone(),
        scenario.tiers.clone(),
    )?;
    let mut cases = Vec::new();
    let mut rejected = Vec::new();
    let mut revoked = Vec::new();
    for line in reports {
        let id = match court.open_case(&line.signed, &line.reporter, registry) {
            Ok(id) => id,
            Err(AdjudicationError::Attestation(e)) => {
                rejected.push(RejectedReport {
                    statement: line.signed.statement.id.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if court.case(&id)?.verdict().is_some() {
            continue;
        }
        let verdict = court.run_cascade(&id)?;
        let sanction = court.sanction(&id, &scenario.sanctions)?;
        let speaker = line.signed.statement.speaker.clone();
        if sanction.revocation_signal {
            registry.revoke_entry(
                &speaker,
                format!("adjudicated case {id} (severity {})", verdict.severity),
                line.signed.statement.timestamp,
            )?;
            if !revoked.contains(&speaker) {
                revoked.push(speaker.clone());
            }
        }
        cases.push(CaseSummary {
            case: id,
            statement: line.signed.statement.id.clone(),
            speaker,
            verdict,
            sanction,
        });
    }
    let report = AdjudicateReport {
        cascade_cost: cases.iter().map(|c| c.verdict.cost).sum(),
        full_cost: scenario.tiers.full_cost() * cases.len() as u64,
        cases,
        rejected,
        revoked,
        history_events: court.events().len(),
    };
    Ok((report, court))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplifyReport {
    pub systems: Vec<AmplificationSuiteReport>,
}

pub fn amplify(scenario: &Scenario, seed: u64, system: Option<&AgentId>) -> Result<AmplifyReport, EngineError> {
    let pipeline = scenario.pipeline.bind(&scenario.world, &scenario.interpretations);
    let graph = scenario.full_relevance();
    let systems = selected(scenario, system)?
        .iter()
        .map(|agent| {
            worst_case_amplification_suite(
                agent,
                &scenario.prompt_space(agent),
                scenario.suites.amplification_budget,
                &graph,
                &scenario.suites.amplification,
                &pipeline,
                &mut stream(seed, &format!("amplify/{}", agent.id)),
            )
        })
        .collect::<Result<_, _>>()?;
    Ok(AmplifyReport { systems })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub check: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub statement: StatementId,
    pub check: CheckReport,
    pub findings: Vec<Finding>,
}

pub fn verify(
    registry: &Registry,
    signed: &SignedStatement,
    claimed: &AgentId,
    now: u64,
) -> Result<VerifyReport, EngineError> {
    let check = registry.user_check(signed, claimed, now)?;
    let findings = check
        .findings()
        .iter()
        .map(|(name, passed)| Finding {
            check: (*name).to_owned(),
            passed: *passed,
        })
        .collect();
    Ok(VerifyReport {
        statement: signed.statement.id.clone(),
        check,
        findings,
    })
}

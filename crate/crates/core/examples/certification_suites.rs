//! The pre-deployment suites on two agents, a Goodhart padding probe, and
//! certification against one threshold set.

use std::collections::BTreeSet;

use truthcert::attestation::KeyPair;
use truthcert::certification::{
    average_case_metrics, calibration_check, certify, goodhart_probe, honesty_probe, pad_runs, tally_metrics,
    worst_case_search, CertificationRequest, CertificationThresholds, Conversation, PromptSpace, Suite,
    SuiteResults,
};
use truthcert::evaluation::PipelineConfig;
use truthcert::seed::stream;
use truthcert::statement::InterpretationTable;
use truthcert::world::{AgentModel, AgentPolicy, Prompt, WorldModel};

fn main() {
    let world = WorldModel::from_truths((0..30).map(|i| (format!("q{i}"), i % 4 != 1)));
    let table = InterpretationTable::new();
    let config = PipelineConfig::faithful();
    let pipeline = config.bind(&world, &table);
    let validation: Vec<Conversation> = (0..6)
        .map(|c| Conversation {
            id: format!("conv{c}").into(),
            prompts: (0..5).map(|i| Prompt::ask(format!("q{}", c * 5 + i))).collect(),
        })
        .collect();
    let every: Vec<Prompt> = world.propositions().map(|p| Prompt::ask(p.clone())).collect();

    let mut careless = AgentPolicy::always_truthful();
    careless.mistake_rate = 0.15;
    for agent in [
        AgentModel::from_world("steady", AgentPolicy::always_truthful(), &world),
        AgentModel::from_world("careless", careless, &world),
    ] {
        let label = |s: &str| format!("{s}/{}", agent.id);
        let avg = average_case_metrics(&agent, &validation, &pipeline, &mut stream(9, &label("avg"))).unwrap();
        let padded = pad_runs(&avg.runs, &[("q0".into(), true)], 10);
        let padded = tally_metrics(&agent.id, &padded, &pipeline).unwrap();
        let probe = goodhart_probe(&avg.report, &padded);

        let space = PromptSpace {
            propositions: world.propositions().cloned().collect(),
            payoff_relevant: BTreeSet::new(),
        };
        let results = SuiteResults {
            average: Some(avg.report.clone()),
            worst: Some(worst_case_search(&agent, &space, 60, &pipeline, &mut stream(9, &label("worst"))).unwrap()),
            calibration: Some(calibration_check(&agent, &every, &world, 0.1, 20, &mut stream(9, &label("cal"))).unwrap()),
            honesty: Some(honesty_probe(&agent, &every, &world, &mut stream(9, &label("hon"))).unwrap()),
            amplification: None,
        };
        let request = CertificationRequest {
            system: agent.id.clone(),
            level: "basic".into(),
            thresholds: CertificationThresholds::default(),
            suites: [Suite::Average, Suite::Worst, Suite::Calibration, Suite::Honesty].into(),
            issued_at: 0,
            validity: 365,
            public_key: KeyPair::from_seed([7; 32]).public_key(),
            policy_hash: agent.policy_hash(),
        };
        let outcome = certify(&request, &results);

        println!("== {}", agent.id);
        println!(
            "negligent per claim {:?} ({} of {}), padded {:?}, gaming flagged: {}",
            avg.report.negligent_per_claim,
            avg.report.counts.negligent,
            avg.report.counts.claims,
            padded.negligent_per_claim,
            probe.flagged
        );
        for v in outcome.verdicts() {
            println!("  {:?}: passed {} measured {:?} limit {:?}", v.suite, v.passed, v.measured, v.limit);
        }
        match outcome.certificate() {
            Some(c) => println!("  certificate {} valid until {}", c.id, c.expires_at),
            None => println!("  rejected"),
        }
    }
}

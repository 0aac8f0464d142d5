//! A reported statement going through the tier cascade, a sanction, and a
//! reversal once new evidence arrives.

use truthcert::adjudication::{Court, SanctionPolicy, Tier, TierConfig};
use truthcert::attestation::{sign_statement, KeyPair, Registry};
use truthcert::evaluation::{EvaluatorConfig, PipelineConfig};
use truthcert::statement::{Claim, InterpretationTable, Statement};
use truthcert::world::{WorldModel, WorldPatch};

fn main() {
    let key = KeyPair::from_seed([42; 32]);
    let mut registry = Registry::new();
    registry.register("assistant".into(), key.public_key()).unwrap();

    let world = WorldModel::from_truths([("drug_approved", false), ("trial_finished", true)]);
    let mut screen = PipelineConfig::faithful();
    screen.ground_truth = EvaluatorConfig {
        fidelity: 0.8,
        ..EvaluatorConfig::faithful()
    };
    let tiers = TierConfig::new(vec![
        Tier::screening("screen", screen, 1),
        Tier::conclusive("panel", PipelineConfig::faithful(), 25),
    ])
    .unwrap();
    let mut court = Court::new(world, InterpretationTable::new(), tiers).unwrap();

    let statement = Statement::new(
        "assistant@7",
        "assistant",
        7,
        "support-chat",
        vec![Claim::asserting("drug_approved", true)],
    );
    let signed = sign_statement(&key, &statement);
    let case = court.open_case(&signed, "user-17", &registry).unwrap();
    let verdict = court.run_cascade(&case).unwrap();
    println!("verdict: {verdict:?}");
    let sanction = court.sanction(&case, &SanctionPolicy::default()).unwrap();
    println!("sanction: {sanction:?}");

    let later = court.reevaluate(&case, &WorldPatch::set("drug_approved", true)).unwrap();
    println!("after new evidence: {later:?}");
    println!("penalty reversals: {}", court.reversal_count(&case));
    println!("-- case history --");
    print!("{}", court.export_history());
}

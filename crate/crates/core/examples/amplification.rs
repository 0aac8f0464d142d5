//! Follow-up questioning of an agent that made an honest mistake and of one
//! that defends its mistakes.

use truthcert::amplification::{generate_followups, run_amplification, AmplificationConfig, ProbeMode, RelevanceGraph, Relation};
use truthcert::evaluation::PipelineConfig;
use truthcert::seed::stream;
use truthcert::statement::{Claim, InterpretationTable, Statement};
use truthcert::world::{AgentModel, AgentPolicy, WorldModel, WorldPatch};

fn main() {
    let world = WorldModel::from_truths([
        ("whales_are_mammals", true),
        ("whales_breathe_air", true),
        ("whales_have_gills", false),
        ("whales_nurse_young", true),
    ]);
    let mut graph = RelevanceGraph::default();
    graph.link("whales_are_mammals", "whales_breathe_air", Relation::Same);
    graph.link("whales_are_mammals", "whales_have_gills", Relation::Opposite);
    graph.link("whales_are_mammals", "whales_nurse_young", Relation::Same);
    let table = InterpretationTable::new();
    let config = PipelineConfig::faithful();
    let pipeline = config.bind(&world, &table);

    // Both agents slipped and said whales are not mammals.
    let slip = Statement::new("a@1", "a", 1, "chat", vec![Claim::asserting("whales_are_mammals", false)]);
    for defend in [false, true] {
        let mut policy = AgentPolicy::always_truthful();
        policy.defend_mistakes = defend;
        let agent = AgentModel::from_world("a", policy, &world);
        let mut script = generate_followups(&slip, ProbeMode::DeceptionProbe, &graph, &AmplificationConfig::default()).unwrap();
        script.contradiction_evidence = Some(WorldPatch::set("whales_are_mammals", true));
        let (result, transcript) =
            run_amplification(&agent, &slip, &script, &graph, &pipeline, &mut stream(3, "amplify")).unwrap();
        println!("== defend_mistakes = {defend}");
        for e in &transcript.entries {
            let said = e.answer.as_ref().map(|s| s.claims[0].render()).unwrap_or_default();
            println!("  [{}] {:<60} negligent={}", e.epoch, said, e.negligent());
        }
        println!(
            "  concedes {:?}, negligent follow-ups {}, contradictions {}",
            result.concedes_on_contradiction,
            result.followup_negligent_count,
            result.consistency_violations.len()
        );
    }
}

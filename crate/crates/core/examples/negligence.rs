//! Scoring claims with a ground-truth oracle and a benchmark panel, and the
//! negligence decision that follows.

use truthcert::evaluation::{severity, EvaluatorConfig, PipelineConfig, SeverityParams};
use truthcert::statement::{Claim, ConfidenceLevel, ContextSlice, InterpretationTable};
use truthcert::world::WorldModel;

fn main() {
    let mut world = WorldModel::from_truths([
        ("everest_tallest", true),
        ("k2_tallest", false),
        ("rain_tomorrow", false),
    ]);
    world.frequencies.insert("rain_tomorrow".into(), 0.3);
    let mut config = PipelineConfig::faithful();
    // One panel member cannot judge mountains at all.
    config.panel = vec![
        EvaluatorConfig::faithful(),
        EvaluatorConfig::blind_to(["k2_tallest"]),
        EvaluatorConfig::biased(-0.1),
    ];
    let table = InterpretationTable::new();
    let pipeline = config.bind(&world, &table);

    let claims = [
        ("confident truth", Claim::asserting("everest_tallest", true)),
        ("confident falsehood", Claim::asserting("k2_tallest", true)),
        (
            "unconfident falsehood",
            Claim::asserting("k2_tallest", true).with_confidence(ConfidenceLevel::Unconfident),
        ),
        (
            "hedged falsehood",
            Claim::asserting("k2_tallest", true).with_confidence(ConfidenceLevel::probabilistic(0.3).unwrap()),
        ),
        ("confident forecast", Claim::asserting("rain_tomorrow", true)),
        (
            "calibrated forecast",
            Claim::asserting("rain_tomorrow", true).with_confidence(ConfidenceLevel::probabilistic(0.3).unwrap()),
        ),
    ];
    for (label, claim) in &claims {
        let e = pipeline.score_claim(claim, ContextSlice::EMPTY).unwrap();
        println!(
            "{label:<22} \"{}\": accuracy {:.2}, benchmark {:.2}, severity {:.2}, negligent {} ({:?})",
            claim.render(),
            e.accuracy.value(),
            e.benchmark.value(),
            e.severity,
            e.decision.negligent,
            e.decision.reason
        );
    }

    let params = SeverityParams::new(2.0).unwrap();
    for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let score = truthcert::evaluation::AccuracyScore::new(s).unwrap();
        println!("severity({s:.2}) = {:.4}", severity(score, params));
    }
}

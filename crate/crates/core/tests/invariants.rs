use proptest::prelude::*;

use truthcert::adjudication::{apply_sanction, cascade, Court, SanctionPolicy, Tier, TierConfig, Verdict};
use truthcert::attestation::{sign_statement, KeyPair, Registry};
use truthcert::evaluation::{severity, AccuracyScore, PipelineConfig, SeverityParams};
use truthcert::statement::{canonical_decode, canonical_encode, Claim, ConfidenceLevel, InterpretationTable, Statement};
use truthcert::world::{WorldModel, WorldPatch};

fn confidence() -> impl Strategy<Value = ConfidenceLevel> {
    prop_oneof![
        Just(ConfidenceLevel::Confident),
        Just(ConfidenceLevel::Unconfident),
        (0.0..=1.0f64).prop_map(|p| ConfidenceLevel::Probabilistic { p }),
    ]
}

fn claim() -> impl Strategy<Value = Claim> {
    ("[a-z_]{1,12}", any::<bool>(), confidence(), any::<bool>()).prop_map(|(p, v, c, self_regarding)| {
        let claim = Claim::asserting(p, v).with_confidence(c);
        if self_regarding {
            claim.self_regarding()
        } else {
            claim
        }
    })
}

fn statement() -> impl Strategy<Value = Statement> {
    ("[a-z0-9@]{1,10}", "[a-z]{1,8}", any::<u64>(), "[a-z0-9-]{0,8}", prop::collection::vec(claim(), 1..5))
        .prop_map(|(id, speaker, t, ctx, claims)| Statement::new(id, speaker, t, ctx, claims))
}

fn two_tiers() -> TierConfig {
    TierConfig::new(vec![
        Tier::screening("screen", PipelineConfig::faithful(), 1),
        Tier::conclusive("panel", PipelineConfig::faithful(), 20),
    ])
    .unwrap()
}

fn verdict(negligent: bool, severity: f64, provisional: bool) -> Verdict {
    Verdict {
        negligent,
        severity,
        tier_reached: 1,
        provisional,
        evidence_version: 0,
        accuracy: AccuracyScore::new(1.0 - severity.sqrt()).unwrap(),
        cost: 1,
    }
}

proptest! {
    #[test]
    fn severity_is_antitone(a in 0.0..=1.0f64, b in 0.0..=1.0f64, exp in 1.0..6.0f64) {
        let p = SeverityParams::new(exp).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let s = |x| severity(AccuracyScore::new(x).unwrap(), p);
        prop_assert!(s(lo) >= s(hi));
        prop_assert!((0.0..=1.0).contains(&s(lo)));
    }

    #[test]
    fn sanction_is_monotone_in_severity(a in 0.0..=1.0f64, b in 0.0..=1.0f64, provisional: bool) {
        let policy = SanctionPolicy::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let low = apply_sanction(&verdict(true, lo, provisional), &policy);
        let high = apply_sanction(&verdict(true, hi, provisional), &policy);
        prop_assert!(low.penalty <= high.penalty);
        prop_assert!(!low.revocation_signal || high.revocation_signal);
        let cleared = apply_sanction(&verdict(false, hi, provisional), &policy);
        prop_assert_eq!(cleared.penalty, 0.0);
        prop_assert!(!cleared.revocation_signal);
    }

    #[test]
    fn canonical_encoding_round_trips(s in statement()) {
        let bytes = canonical_encode(&s);
        prop_assert_eq!(canonical_decode(&bytes).unwrap(), s.clone());
        prop_assert_eq!(canonical_encode(&canonical_decode(&bytes).unwrap()), bytes);
    }

    #[test]
    fn cascade_never_costs_more_than_every_tier(
        truths in prop::collection::vec(any::<bool>(), 8),
        freqs in prop::collection::vec(prop::option::of(0.0..=1.0f64), 8),
        picks in prop::collection::vec((0usize..8, any::<bool>(), confidence()), 1..4),
    ) {
        let mut world = WorldModel::from_truths(truths.iter().enumerate().map(|(i, &t)| (format!("p{i}"), t)));
        for (i, f) in freqs.iter().enumerate() {
            if let Some(f) = f {
                world.frequencies.insert(format!("p{i}").into(), *f);
            }
        }
        let claims = picks
            .into_iter()
            .map(|(i, v, c)| Claim::asserting(format!("p{i}"), v).with_confidence(c))
            .collect();
        let s = Statement::new("s", "bot", 1, "c", claims);
        let tiers = two_tiers();
        let (results, v) = cascade(&s, &world, &InterpretationTable::new(), &tiers, 0).unwrap();
        prop_assert!(v.cost <= tiers.full_cost());
        prop_assert_eq!(v.cost, results.iter().map(|r| r.cost).sum::<u64>());
        prop_assert_eq!(v.tier_reached, results.len());
    }

    #[test]
    fn case_history_is_append_only(
        truths in prop::collection::vec(any::<bool>(), 6),
        ops in prop::collection::vec((0usize..6, any::<bool>()), 1..10),
    ) {
        let world = WorldModel::from_truths(truths.iter().enumerate().map(|(i, &t)| (format!("p{i}"), t)));
        let key = KeyPair::from_seed([9; 32]);
        let mut registry = Registry::new();
        registry.register("bot".into(), key.public_key()).unwrap();
        let mut court = Court::new(world, InterpretationTable::new(), two_tiers()).unwrap();
        let s = Statement::new("bot@1", "bot", 1, "c", vec![Claim::asserting("p0", true)]);
        let id = court.open_case(&sign_statement(&key, &s), "r", &registry).unwrap();
        court.run_cascade(&id).unwrap();
        let mut events = court.events().to_vec();
        let mut history = court.case(&id).unwrap().history().to_vec();
        for (p, v) in ops {
            court.sanction(&id, &SanctionPolicy::default()).unwrap();
            court.reevaluate(&id, &WorldPatch::set(format!("p{p}"), v)).unwrap();
            prop_assert_eq!(&court.events()[..events.len()], &events[..]);
            prop_assert_eq!(&court.case(&id).unwrap().history()[..history.len()], &history[..]);
            events = court.events().to_vec();
            history = court.case(&id).unwrap().history().to_vec();
        }
        let versions: Vec<u32> = court.case(&id).unwrap().verdicts().iter().map(|v| v.evidence_version).collect();
        prop_assert!(versions.windows(2).all(|w| w[0] < w[1]));
    }
}

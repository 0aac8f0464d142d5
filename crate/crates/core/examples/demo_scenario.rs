//! Loads the bundled demo scenario and runs every command on it, printing the
//! summary tables.

use std::path::Path;

use truthcert::certification::Suite;
use truthcert::report::{self, Command, ReportBody, RunReport};
use truthcert::scenario::load_scenario;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/demo.json");
    let loaded = load_scenario(&path).expect("bundled scenario loads");
    let s = &loaded.scenario;
    let seed = s.seed;
    let wrap = |command, body| RunReport::new(command, s, &loaded.sha256, seed, body);

    let (sim, signed) = report::simulate(s, seed, None).unwrap();
    print!("{}", wrap(Command::Simulate, ReportBody::Simulate(sim)).summary());

    let mut registry = s.registry();
    let suites = Suite::ALL.into_iter().collect();
    let cert = report::certify(s, seed, None, &suites, &mut registry).unwrap();
    print!("{}", wrap(Command::Certify, ReportBody::Certify(cert)).summary());

    let reports: Vec<report::ReportLine> = signed
        .into_iter()
        .map(|signed| report::ReportLine {
            reporter: "demo".into(),
            signed,
        })
        .collect();
    let (adj, _court) = report::adjudicate(s, &reports, &mut registry).unwrap();
    let adj = wrap(Command::Adjudicate, ReportBody::Adjudicate(adj));
    let text = adj.summary();
    // Only the tail: one row per reported statement is long.
    for line in text.lines().rev().take(4).collect::<Vec<_>>().into_iter().rev() {
        println!("{line}");
    }

    let amp = report::amplify(s, seed, None).unwrap();
    print!("{}", wrap(Command::Amplify, ReportBody::Amplify(amp)).summary());
}

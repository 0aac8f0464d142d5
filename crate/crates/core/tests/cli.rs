use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use truthcert::report::exit;

fn demo() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "scenarios", "demo.json"].iter().collect()
}

fn truthcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_truthcert"))
        .arg("--scenario")
        .arg(demo())
        .args(args)
        .env_remove("TRUTHCERT_SCENARIO_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> u8 {
    out.status.code().expect("exited normally") as u8
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn first_line_of(file: &Path, speaker: &str) -> String {
    std::fs::read_to_string(file)
        .unwrap()
        .lines()
        .find(|l| l.contains(&format!("\"speaker\":\"{speaker}\"")))
        .expect("speaker has a statement")
        .to_owned()
}

#[test]
fn certify_truthful_system_succeeds() {
    let dir = TempDir::new().unwrap();
    let registry = path(&dir, "registry.json");
    let out = truthcert(&["certify", "--system", "sage", "--registry", &registry]);
    assert_eq!(code(&out), exit::SUCCESS, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["body"]["systems"][0]["outcome"]["outcome"], "certified");
    assert!(std::fs::read_to_string(&registry).unwrap().contains("sage:basic:0"));
}

#[test]
fn certify_all_reports_rejections() {
    let out = truthcert(&["certify", "--summary"]);
    assert_eq!(code(&out), exit::CERTIFICATION_REJECTED);
    assert!(String::from_utf8_lossy(&out.stdout).contains("broker"));
}

#[test]
fn verify_revoked_system_prints_all_findings() {
    let dir = TempDir::new().unwrap();
    let registry = path(&dir, "registry.json");
    let statements = path(&dir, "statements.jsonl");
    assert_eq!(code(&truthcert(&["certify", "--registry", &registry])), exit::CERTIFICATION_REJECTED);
    assert_eq!(code(&truthcert(&["simulate", "--statements", &statements, "--out", &path(&dir, "sim.json")])), 0);
    let adj = truthcert(&["adjudicate", "--reports", &statements, "--registry", &registry, "--out", &path(&dir, "adj.json")]);
    assert_eq!(code(&adj), exit::SUCCESS, "{}", String::from_utf8_lossy(&adj.stderr));
    let adj: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path(&dir, "adj.json")).unwrap()).unwrap();
    assert!(adj["body"]["revoked"].as_array().unwrap().iter().any(|s| s == "broker"));

    let broker = path(&dir, "broker.json");
    std::fs::write(&broker, first_line_of(Path::new(&statements), "broker")).unwrap();
    let out = truthcert(&["verify", "--statement", &broker, "--registry", &registry]);
    assert_ne!(code(&out), exit::SUCCESS);
    assert_eq!(code(&out), exit::UNTRUSTED);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 4, "{text}");
    assert!(text.contains("FAIL (iv)"));

    let sage = path(&dir, "sage.json");
    std::fs::write(&sage, first_line_of(Path::new(&statements), "sage")).unwrap();
    assert_eq!(code(&truthcert(&["verify", "--statement", &sage, "--registry", &registry])), exit::SUCCESS);
}

#[test]
fn tampered_statement_is_rejected() {
    let dir = TempDir::new().unwrap();
    let statements = path(&dir, "statements.jsonl");
    truthcert(&["simulate", "--statements", &statements, "--summary"]);
    let line = first_line_of(Path::new(&statements), "sage");
    let mut forged: serde_json::Value = serde_json::from_str(&line).unwrap();
    let polarity = &mut forged["statement"]["claims"][0]["polarity"];
    *polarity = serde_json::Value::Bool(!polarity.as_bool().unwrap());
    let forged = forged.to_string();
    let reports = path(&dir, "forged.jsonl");
    std::fs::write(&reports, forged).unwrap();
    let out = truthcert(&["adjudicate", "--reports", &reports]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["body"]["cases"].as_array().unwrap().len(), 0);
    assert_eq!(report["body"]["rejected"].as_array().unwrap().len(), 1);
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = TempDir::new().unwrap();
    let strip = |p: &str| {
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_ms");
        serde_json::to_string(&v).unwrap()
    };
    for cmd in ["simulate", "amplify"] {
        let (a, b) = (path(&dir, &format!("{cmd}-a.json")), path(&dir, &format!("{cmd}-b.json")));
        truthcert(&[cmd, "--seed", "42", "--out", &a]);
        truthcert(&[cmd, "--seed", "42", "--out", &b]);
        assert_eq!(strip(&a), strip(&b), "{cmd}");
    }
}

#[test]
fn amplify_reports_failures() {
    let out = truthcert(&["amplify", "--system", "stubborn"]);
    assert_eq!(code(&out), exit::AMPLIFICATION_FAILED);
    assert_eq!(code(&truthcert(&["amplify", "--system", "sage"])), exit::SUCCESS);
}

#[test]
fn error_exit_codes() {
    assert_eq!(code(&truthcert(&["simulate", "--system", "nobody"])), exit::SCENARIO_DANGLING);

    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, "{\"name\": 3}").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_truthcert"))
        .args(["--scenario", &bad, "simulate"])
        .output()
        .unwrap();
    assert_eq!(code(&out), exit::SCENARIO_SCHEMA);

    let out = Command::new(env!("CARGO_BIN_EXE_truthcert"))
        .args(["--scenario", &path(&dir, "missing.json"), "simulate"])
        .output()
        .unwrap();
    assert_eq!(code(&out), exit::IO);

    let out = Command::new(env!("CARGO_BIN_EXE_truthcert")).arg("frobnicate").output().unwrap();
    assert_eq!(code(&out), exit::USAGE);
}

#[test]
fn scenario_dir_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_truthcert"))
        .args(["simulate", "--system", "sage", "--summary"])
        .env("TRUTHCERT_SCENARIO_DIR", demo().parent().unwrap())
        .output()
        .unwrap();
    assert_eq!(code(&out), exit::SUCCESS, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sage"));
}

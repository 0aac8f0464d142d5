//! Signing statements, certificate issue and revocation, key rotation, and
//! the four checks a user can run against the registry.

use truthcert::attestation::{sign_statement, DeployerClaim, KeyPair, Registry};
use truthcert::certification::Certificate;
use truthcert::statement::{Claim, Statement};

fn main() {
    let old_key = KeyPair::from_seed([1; 32]);
    let new_key = KeyPair::from_seed([2; 32]);
    let mut registry = Registry::new();
    registry.register("helper".into(), old_key.public_key()).unwrap();
    registry
        .record_claim(
            &"helper".into(),
            DeployerClaim {
                deployer: "example-corp".into(),
                claims_certified: true,
                standard_level: Some("basic".into()),
            },
        )
        .unwrap();
    registry
        .issue(Certificate::new(
            "helper-basic-1",
            "helper".into(),
            "basic",
            0,
            100,
            old_key.public_key(),
            "policy-hash".into(),
        ))
        .unwrap();

    let statement = Statement::new("helper@1", "helper", 1, "chat", vec![Claim::asserting("sky_blue", true)]);
    let signed = sign_statement(&old_key, &statement);
    print_checks("fresh", &registry, &signed, 10);

    let mut forged = signed.clone();
    forged.statement.claims[0].polarity = false;
    println!("tampered copy verifies: {}", registry.verify_signed(&forged).is_ok());

    registry.rotate_key(&"helper".into(), new_key.public_key(), 20).unwrap();
    print_checks("after key rotation", &registry, &signed, 30);

    registry.revoke_entry(&"helper".into(), "severe falsehood", 40).unwrap();
    print_checks("after revocation", &registry, &signed, 50);
}

fn print_checks(label: &str, registry: &Registry, signed: &truthcert::attestation::SignedStatement, now: u64) {
    let report = registry.user_check(signed, &"helper".into(), now).unwrap();
    println!("== {label} (trusted: {})", report.trusted());
    for (check, ok) in report.findings() {
        println!("  {} {check}", if ok { "ok  " } else { "FAIL" });
    }
    if let Some(epoch) = report.rotation_notice {
        println!("  signed with retired key of epoch {epoch}");
    }
}

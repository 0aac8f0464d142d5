pub mod adjudication;
pub mod amplification;
pub mod attestation;
pub mod certification;
pub mod evaluation;
pub mod scenario;
pub mod report;
pub mod seed;
pub mod statement;
pub mod world;

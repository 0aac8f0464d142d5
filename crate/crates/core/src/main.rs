//! Command-line front end. Exit codes are listed in `truthcert::report::exit`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use truthcert::attestation::{Registry, SignedStatement};
use truthcert::certification::Suite;
use truthcert::report::{self, exit, Command, EngineError, ReportBody, RunReport};
use truthcert::scenario::{load_scenario, resolve_path, LoadedScenario, SCENARIO_DIR_ENV};
use truthcert::statement::AgentId;

#[derive(Parser)]
#[command(name = "truthcert", version, about = "Truthfulness certification and adjudication engine")]
struct Cli {
    /// Scenario file; defaults to demo.json in $TRUTHCERT_SCENARIO_DIR.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Overrides the scenario's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print a human-readable table.
    #[arg(long, global = true)]
    summary: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run agents over the validation conversations.
    Simulate {
        #[arg(long)]
        system: Option<String>,
        /// Write signed statements as JSON lines.
        #[arg(long)]
        statements: Option<PathBuf>,
    },
    /// Run the certification suites and issue certificates.
    Certify {
        #[arg(long)]
        system: Option<String>,
        /// Comma-separated: average, worst, calibration, honesty,
        /// amplification, or all.
        #[arg(long, default_value = "all")]
        suites: String,
        /// Registry file to read and update.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Adjudicate reported statements.
    Adjudicate {
        /// JSON lines of signed statements, optionally with a "reporter".
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Write the case history as JSON lines.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Run the amplification worst-case suite.
    Amplify {
        #[arg(long)]
        system: Option<String>,
    },
    /// Run the four user checks on a signed statement.
    Verify {
        #[arg(long)]
        statement: PathBuf,
        /// System the statement is presented as coming from; defaults to
        /// its speaker.
        #[arg(long)]
        system: Option<String>,
        /// Registry file; without one, every agent is certified first.
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        now: u64,
    },
}

fn read(path: &Path) -> Result<String, EngineError> {
    std::fs::read_to_string(path).map_err(|e| EngineError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), EngineError> {
    std::fs::write(path, text).map_err(|e| EngineError::Io(format!("{}: {e}", path.display())))
}

fn parse_suites(text: &str) -> Result<BTreeSet<Suite>, String> {
    if text == "all" {
        return Ok(Suite::ALL.into_iter().collect());
    }
    text.split(',')
        .map(|s| Suite::parse(s.trim()).ok_or_else(|| format!("unknown suite {s:?}")))
        .collect()
}

fn load_registry(path: Option<&Path>, loaded: &LoadedScenario) -> Result<Registry, EngineError> {
    match path {
        Some(p) if p.exists() => Ok(Registry::from_json(&read(p)?)?),
        _ => Ok(loaded.scenario.registry()),
    }
}

fn run(cli: Cli) -> Result<RunReport, EngineError> {
    let dir = std::env::var_os(SCENARIO_DIR_ENV).map(PathBuf::from);
    let path = resolve_path(cli.scenario.as_deref(), dir.as_deref())
        .ok_or_else(|| EngineError::Io(format!("no --scenario given and {SCENARIO_DIR_ENV} is not set")))?;
    let loaded = load_scenario(&path)?;
    let scenario = &loaded.scenario;
    let seed = cli.seed.unwrap_or(scenario.seed);
    let system = |s: &Option<String>| s.as_deref().map(AgentId::from);

    let (command, body) = match &cli.command {
        Cmd::Simulate { system: s, statements } => {
            let (r, signed) = report::simulate(scenario, seed, system(s).as_ref())?;
            if let Some(p) = statements {
                let lines: String = signed
                    .iter()
                    .map(|s| serde_json::to_string(s).expect("statements serialize") + "\n")
                    .collect();
                write(p, &lines)?;
            }
            (Command::Simulate, ReportBody::Simulate(r))
        }
        Cmd::Certify { system: s, suites, registry } => {
            let suites = parse_suites(suites).map_err(EngineError::Io)?;
            let mut reg = load_registry(registry.as_deref(), &loaded)?;
            let r = report::certify(scenario, seed, system(s).as_ref(), &suites, &mut reg)?;
            if let Some(p) = registry {
                write(p, &reg.to_json())?;
            }
            (Command::Certify, ReportBody::Certify(r))
        }
        Cmd::Adjudicate { reports, registry, history } => {
            let lines = report::read_reports(&read(reports)?)?;
            let mut reg = load_registry(registry.as_deref(), &loaded)?;
            let (r, court) = report::adjudicate(scenario, &lines, &mut reg)?;
            if let Some(p) = registry {
                write(p, &reg.to_json())?;
            }
            if let Some(p) = history {
                write(p, &court.export_history())?;
            }
            (Command::Adjudicate, ReportBody::Adjudicate(r))
        }
        Cmd::Amplify { system: s } => (
            Command::Amplify,
            ReportBody::Amplify(report::amplify(scenario, seed, system(s).as_ref())?),
        ),
        Cmd::Verify { statement, system: s, registry, now } => {
            let signed: SignedStatement = serde_json::from_str(&read(statement)?)
                .map_err(|e| EngineError::Io(format!("{}: {e}", statement.display())))?;
            let reg = match registry {
                Some(p) => Registry::from_json(&read(p)?)?,
                None => {
                    let mut reg = scenario.registry();
                    let all = Suite::ALL.into_iter().collect();
                    report::certify(scenario, seed, None, &all, &mut reg)?;
                    reg
                }
            };
            let claimed = system(s).unwrap_or_else(|| signed.statement.speaker.clone());
            (Command::Verify, ReportBody::Verify(report::verify(&reg, &signed, &claimed, *now)?))
        }
    };
    Ok(RunReport::new(command, scenario, &loaded.sha256, seed, body))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    let summary = cli.summary;
    let started = Instant::now();
    let mut report = match run(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    report.wall_time_ms = Some(started.elapsed().as_millis() as u64);
    if let ReportBody::Verify(v) = &report.body {
        for f in &v.findings {
            println!("{} {}", if f.passed { "ok  " } else { "FAIL" }, f.check);
        }
    } else if summary {
        print!("{}", report.summary());
    }
    match &out {
        Some(p) => {
            if let Err(e) = write(p, &report.to_json()) {
                eprintln!("error: {e}");
                return ExitCode::from(exit::IO);
            }
        }
        None if !summary && !matches!(report.body, ReportBody::Verify(_)) => println!("{}", report.to_json()),
        None => {}
    }
    ExitCode::from(report.exit_code())
}

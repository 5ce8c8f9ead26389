//! `ctsim`: batch runner for contact-tracing protocol experiments.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 I/O error
//! (including stored artifacts that fail to parse or do not match).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctsim::adversary::{run_attacks, AttackParams, AttackReport};
use ctsim::metrics::format::ReportLabel;
use ctsim::metrics::{compare_protocols, privacy_report, utility_report};
use ctsim::protocols::{run_protocol, ProtocolRun};
use ctsim::scenario::{ProtocolChoice, Scenario};
use ctsim::{run_simulation, SimulationTrace};

#[derive(Parser)]
#[command(name = "ctsim", version, about = "Simulate contact-tracing protocols and attack them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol on one seed; write the trace, the run, the attacks and both reports.
    Simulate(RunArgs),
    /// Run all four protocols over every seed and write the comparison table.
    Compare(RunArgs),
    /// Rerun the attacks on the trace.txt and run.txt stored in --out.
    Attack(AttackArgs),
    /// Check a config file and list every problem.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces both `seed` and `seeds` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to `out_dir`, then the current directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table format for `compare`; reports are always text.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct AttackArgs {
    /// Attack parameters (theta, k_anchors, stations); defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding trace.txt and run.txt; outputs land here too.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

impl From<ctsim::Error> for Failure {
    fn from(e: ctsim::Error) -> Self {
        match e {
            ctsim::Error::Config(c) => Failure::Config(violation_lines(&c)),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn violation_lines(errors: &ctsim::world::ConfigErrors) -> String {
    let lines: Vec<String> = errors.0.iter().map(|v| format!("  {v}")).collect();
    format!("invalid configuration:\n{}", lines.join("\n"))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Scenario::parse(&read(path)?).map_err(|e| Failure::Config(violation_lines(&e)))
}

fn out_dir(flag: Option<PathBuf>, scenario: &Scenario) -> PathBuf {
    flag.or_else(|| scenario.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."))
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let io = |e: std::io::Error| Failure::Io(format!("cannot write {}: {e}", dir.join(name).display()));
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| io(e.error))?;
    Ok(path)
}

fn write_all(dir: &Path, files: &[(&str, String)]) -> Result<(), Failure> {
    for (name, contents) in files {
        let path = write_atomic(dir, name, contents)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn report_files(trace: &SimulationTrace, run: &ProtocolRun, attacks: &AttackReport) -> Result<[(&'static str, String); 3], Failure> {
    let label = ReportLabel { run_id: run.run_id, kind: run.kind() };
    Ok([
        ("attacks.txt", attacks.to_text()),
        ("privacy.txt", privacy_report(run, attacks, trace)?.to_text(label)),
        ("utility.txt", utility_report(run, trace)?.to_text(label)),
    ])
}

fn simulate(args: RunArgs) -> Result<(), Failure> {
    let mut scenario = load_scenario(&args.config)?;
    if let Some(seed) = args.seed {
        scenario = scenario.with_seed(seed);
    }
    let ProtocolChoice::One(kind) = scenario.protocol else {
        return Err(Failure::Config(
            "invalid configuration:\n  protocol: simulate runs a single protocol; set P1, P1a, P2 or P3".into(),
        ));
    };
    let trace = run_simulation(&scenario.world)?;
    let run = run_protocol(&trace, kind, &scenario.options)?;
    let attacks = run_attacks(&trace, &run, &scenario.attack)?;
    let [a, p, u] = report_files(&trace, &run, &attacks)?;
    let dir = out_dir(args.out, &scenario);
    write_all(&dir, &[("trace.txt", trace.to_text()), ("run.txt", run.to_text()), a, p, u])
}

fn compare(args: RunArgs) -> Result<(), Failure> {
    let mut scenario = load_scenario(&args.config)?;
    if let Some(seed) = args.seed {
        scenario = scenario.with_seed(seed);
    }
    if scenario.protocol != ProtocolChoice::All {
        return Err(Failure::Config(
            "invalid configuration:\n  protocol: compare runs every protocol; set protocol = all".into(),
        ));
    }
    let table = compare_protocols(&scenario.world, &scenario.seeds, &scenario.options, &scenario.attack)?;
    let dir = out_dir(args.out, &scenario);
    match args.format {
        Format::Text => write_all(&dir, &[("table.txt", table.to_text())]),
        Format::Csv => write_all(&dir, &[("table.csv", table.to_csv())]),
    }
}

fn attack(args: AttackArgs) -> Result<(), Failure> {
    let params = match &args.config {
        Some(path) => load_scenario(path)?.attack,
        None => AttackParams::default(),
    };
    let stored = |name: &str| -> Result<(PathBuf, String), Failure> {
        let path = args.out.join(name);
        let text = read(&path)?;
        Ok((path, text))
    };
    let bad = |path: &Path, e: &dyn std::fmt::Display| Failure::Io(format!("{}: {e}", path.display()));
    let (tpath, ttext) = stored("trace.txt")?;
    let trace = SimulationTrace::parse_text(&ttext).map_err(|e| bad(&tpath, &e))?;
    let (rpath, rtext) = stored("run.txt")?;
    let run = ProtocolRun::parse_text(&rtext).map_err(|e| bad(&rpath, &e))?;
    let attacks = run_attacks(&trace, &run, &params).map_err(|e| bad(&rpath, &e))?;
    let files = report_files(&trace, &run, &attacks).map_err(|e| bad(&rpath, &e))?;
    write_all(&args.out, &files)
}

fn validate(config: &Path) -> Result<(), Failure> {
    load_scenario(config).map(|_| ())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Compare(args) => compare(args),
        Command::Attack(args) => attack(args),
        Command::Validate { config } => validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

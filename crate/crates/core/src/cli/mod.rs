//! The `qdef` command-line interface.
//!
//! Exit codes: 0 success, 1 self-test failure or unwritable output,
//! 2 invalid configuration (no files are written), 3 solver failure.

pub mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::conic::SolveOptions;
use crate::error::Error;
use crate::selftest::{run_suites, suite_names};

pub use config::ScenarioConfig;
pub use report::{deficiency_report, scenario_report, Command as ReportKind, ScenarioOutput};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "qdef",
    version,
    about = "Channel deficiency and convergence diagnostics for quantum and classical Markov chains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the chain and run every analysis; writes trace.csv and summary.json.
    Simulate(ScenarioArgs),
    /// Print δ in both directions and Δ between `family` and `target`.
    Deficiency(DeficiencyArgs),
    /// Contraction-based ergodicity test (plus L¹ tests for classical chains).
    Ergodicity(ScenarioArgs),
    /// Estimate the limit family and check the fixed-point property.
    Limit(ScenarioArgs),
    /// Monotone divergence traces for the configured label tuples.
    Divergences(ScenarioArgs),
    /// Run the built-in verification suites and print a per-suite table.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for trace.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the ergodicity tolerance (simulate, ergodicity) or the
    /// limit-detection tolerance (limit).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DeficiencyArgs {
    /// Scenario config (JSON) with `family` and `target`.
    #[arg(long)]
    pub config: PathBuf,
    /// Optional directory for a detailed summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Run only this suite.
    #[arg(long)]
    pub suite: Option<String>,
    /// Solver tolerance (gap and feasibility) used by every suite.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Parses `std::env::args` and runs the command.
pub fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}

pub fn run(cli: Cli) -> u8 {
    match cli.command {
        Command::Simulate(a) => scenario(&a, ReportKind::Simulate),
        Command::Ergodicity(a) => scenario(&a, ReportKind::Ergodicity),
        Command::Limit(a) => scenario(&a, ReportKind::Limit),
        Command::Divergences(a) => scenario(&a, ReportKind::Divergences),
        Command::Deficiency(a) => deficiency(&a),
        Command::Selftest(a) => selftest(&a),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Solver { .. } | Error::NoInteriorPoint(_) => EXIT_SOLVER,
        _ => EXIT_INVALID,
    }
}

fn fail(err: &Error) -> u8 {
    let code = exit_code(err);
    let kind = if code == EXIT_SOLVER {
        "solver failure"
    } else {
        "invalid input"
    };
    eprintln!("qdef: {kind}: {err}");
    code
}

fn check_tol(tol: Option<f64>) -> Result<(), Error> {
    match tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => {
            Err(Error::Config(format!("--tol must be positive, got {t}")))
        }
        _ => Ok(()),
    }
}

fn write_outputs(dir: &Path, files: &[(&str, &str)]) -> u8 {
    let result = std::fs::create_dir_all(dir).and_then(|()| {
        files
            .iter()
            .try_for_each(|(name, body)| std::fs::write(dir.join(name), body))
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("qdef: cannot write to {}: {e}", dir.display());
            EXIT_FAILURE
        }
    }
}

fn scenario(args: &ScenarioArgs, kind: ReportKind) -> u8 {
    // Everything is computed before the output directory is touched, so a
    // failing run leaves no files behind.
    let output = check_tol(args.tol)
        .and_then(|()| ScenarioConfig::from_path(&args.config))
        .and_then(|cfg| scenario_report(&cfg, kind, args.tol, &SolveOptions::default()));
    match output {
        Ok(out) => write_outputs(
            &args.out,
            &[
                ("trace.csv", &out.trace_csv),
                ("summary.json", &out.summary),
            ],
        ),
        Err(e) => fail(&e),
    }
}

fn deficiency(args: &DeficiencyArgs) -> u8 {
    let report = ScenarioConfig::from_path(&args.config)
        .and_then(|cfg| deficiency_report(&cfg, &SolveOptions::default()));
    match report {
        Ok((short, detailed)) => {
            if let Some(dir) = &args.out {
                let code = write_outputs(dir, &[("summary.json", &detailed)]);
                if code != EXIT_OK {
                    return code;
                }
            }
            println!("{short}");
            EXIT_OK
        }
        Err(e) => fail(&e),
    }
}

fn selftest(args: &SelftestArgs) -> u8 {
    if let Err(e) = check_tol(args.tol) {
        return fail(&e);
    }
    if let Some(name) = &args.suite {
        if !suite_names().contains(&name.as_str()) {
            eprintln!(
                "qdef: unknown suite `{name}`; available: {}",
                suite_names().join(", ")
            );
            return EXIT_INVALID;
        }
    }
    let base = args
        .tol
        .map(SolveOptions::with_tolerance)
        .unwrap_or_default();
    let reports = run_suites(args.suite.as_deref(), &base);
    println!("{:<24} crit  result  checks", "suite");
    for r in &reports {
        println!("{r}");
        if !r.passed() {
            for note in &r.notes {
                println!("    {note}");
            }
        }
    }
    let passed = reports.iter().filter(|r| r.passed()).count();
    println!("{passed} of {} suites passed", reports.len());
    if passed == reports.len() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

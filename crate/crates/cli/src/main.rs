//! Command-line front end for the scenario harness.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 guarantee violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scatter_entropy::harness::{self, HarnessError, Mode, Report, ScenarioConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "scatter-entropy", version, about = "Entropy change of a subsystem under weak scattering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify the scenario against the increase conditions.
    Check(Common),
    /// Compute the perturbative coefficients.
    Predict(Common),
    /// Sweep the coupling grid against the exact oracle and fit the model.
    Sweep(Common),
    /// Search adversarially for a scattering matrix that lowers the entropy.
    Demon {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample random scattering matrices and report the smallest change.
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every built-in scenario.
    Suite {
        /// Write all reports as a JSON array.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario TOML file, or `builtin:<name>`.
    scenario: String,
    /// Write sweep rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check(c) => run_one(&c, Mode::Check, |_| {}),
        Command::Predict(c) => run_one(&c, Mode::Predict, |_| {}),
        Command::Sweep(c) => run_one(&c, Mode::Sweep, |_| {}),
        Command::Demon { common, budget, seed } => run_one(&common, Mode::Demon, |cfg| {
            if let Some(b) = budget {
                cfg.budget = b;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
        }),
        Command::Probe { common, samples, seed } => run_one(&common, Mode::Probe, |cfg| {
            if let Some(n) = samples {
                cfg.samples = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
        }),
        Command::Suite { json } => run_suite(json.as_deref()),
    }
}

fn run_one(common: &Common, mode: Mode, adjust: impl FnOnce(&mut ScenarioConfig)) -> ExitCode {
    let mut cfg = match harness::load_scenario(&common.scenario) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    cfg.mode = mode;
    adjust(&mut cfg);
    let report = match harness::run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    print!("{report}");
    let written = write_outputs(&report, common.csv.as_deref(), common.json.as_deref());
    if let Err(e) = written {
        return fail(&e);
    }
    exit_for(&report)
}

fn write_outputs(report: &Report, csv: Option<&Path>, json: Option<&Path>) -> Result<(), HarnessError> {
    if let Some(p) = csv {
        report.write_csv(p)?;
    }
    if let Some(p) = json {
        report.write_json(p)?;
    }
    Ok(())
}

fn run_suite(json: Option<&Path>) -> ExitCode {
    let mut worst = 0u8;
    let mut reports = Vec::new();
    for (name, result) in harness::run_suite() {
        match result {
            Ok(report) => {
                println!("{report}");
                worst = worst.max(code_for(&report));
                reports.push(report);
            }
            Err(e) => {
                eprintln!("{name}: error: {e}");
                worst = worst.max(e.exit_code() as u8);
            }
        }
    }
    if let Some(path) = json {
        let body = reports.iter().map(Report::to_json).collect::<Vec<_>>().join(",\n");
        if let Err(e) = std::fs::write(path, format!("[\n{body}\n]\n")) {
            eprintln!("error: cannot write {}: {e}", path.display());
            worst = worst.max(EXIT_CONFIG);
        }
    }
    ExitCode::from(worst)
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn code_for(report: &Report) -> u8 {
    if report.guarantee_violation.is_some() {
        EXIT_VIOLATION
    } else {
        0
    }
}

fn exit_for(report: &Report) -> ExitCode {
    if let Some(v) = &report.guarantee_violation {
        eprintln!("guarantee violation: {v}");
    }
    ExitCode::from(code_for(report))
}

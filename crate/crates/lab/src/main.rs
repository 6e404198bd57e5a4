//! `ofmu` — experiment runner and verification harness.
//!
//! Subcommands: `run <config>` executes an experiment end to end,
//! `verify` runs the convergence checks on the canonical instance
//! bank, `udi <config>` runs the difficulty-coupling study, and
//! `report <dir>` re-renders the CSV/JSON views of a stored run.
//! Exit codes: 0 success, 1 check failure, 2 config error, 3 runtime
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ofmu_lab::config::ExperimentConfig;
use ofmu_lab::error::LabError;
use ofmu_lab::experiment::run_experiment;
use ofmu_lab::report::RunReport;
use ofmu_lab::udi_study::run_udi_study;
use ofmu_lab::verify_suite::{run_verify_suite, Lemma, Outcome};

#[derive(Parser)]
#[command(name = "ofmu", version, about = "Penalty-based bi-level unlearning laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config.
    Run {
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the convergence checks on the canonical instance bank.
    Verify {
        /// Comma-separated subset: lemma1,lemma2,lemma3 (default all).
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the difficulty-coupling study of a config's [udi_study].
    Udi {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-render metrics.csv and the summary table from a stored run.
    Report { dir: PathBuf },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig, LabError> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), LabError> {
    match cli.command {
        Command::Run { config, seed } => {
            let config = load_config(&config, seed)?;
            let out_dir = PathBuf::from(&config.output_dir);
            let report = run_experiment(&config, &out_dir)?;
            print!("{}", report.render_table());
            println!("artifacts: {}", out_dir.display());
            Ok(())
        }
        Command::Verify { only, out } => {
            let selection: Vec<Lemma> = match only {
                Some(tokens) => tokens
                    .iter()
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| Lemma::parse(t))
                    .collect::<Result<_, _>>()?,
                None => Lemma::ALL.to_vec(),
            };
            let report = run_verify_suite(&selection)?;
            for check in &report.checks {
                let tag = match check.outcome {
                    Outcome::Pass => "PASS",
                    Outcome::Fail => "FAIL",
                    Outcome::Skipped => "SKIP",
                };
                eprintln!("{tag} {}", check.name);
            }
            let json = serde_json::to_string_pretty(&report)
                .map_err(LabError::from)?;
            match out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
            if report.passed() {
                Ok(())
            } else {
                Err(LabError::CheckFailed(format!(
                    "{} of {} checks failed",
                    report.failures,
                    report.checks.len()
                )))
            }
        }
        Command::Udi { config, seed } => {
            let config = load_config(&config, seed)?;
            let out_dir = PathBuf::from(&config.output_dir);
            let report = run_udi_study(&config, &out_dir)?;
            for method in &report.methods {
                match method.tau {
                    Some(tau) => println!("{}: tau = {tau:.4}", method.name),
                    None => println!("{}: tau undefined (constant drops)", method.name),
                }
            }
            println!("artifacts: {}", out_dir.display());
            Ok(())
        }
        Command::Report { dir } => {
            let report = RunReport::load(&dir.join("report.json"))?;
            report.write_metrics_csv(&dir.join("metrics.csv"))?;
            print!("{}", report.render_table());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

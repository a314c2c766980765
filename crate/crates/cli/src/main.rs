//! `rwaves`: run, validate and report random wave experiments.
//!
//! Exit codes: 0 when every claim passes, 1 when any claim fails, 2 on errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rwaves_core::experiment::{emit_report, run_experiment, summary_text, ExperimentConfig, ResultRecord, RunStatus};

#[derive(Parser)]
#[command(name = "rwaves", version, about = "Gaussian random wave experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config (or a result.json's embedded config).
    Run { config: PathBuf },
    /// Regenerate summary.txt and plots from a result directory and print the summary.
    Report { result_dir: PathBuf },
    /// Check a config against every precondition without computing anything.
    Validate { config: PathBuf },
}

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn verdict(record: &ResultRecord) -> ExitCode {
    ExitCode::from(if record.all_passed() { EXIT_PASS } else { EXIT_FAIL })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS });
        }
    };
    match cli.command {
        Command::Run { config } => {
            let result = ExperimentConfig::load(&config).and_then(|cfg| run_experiment(&cfg).map(|r| (cfg, r)));
            match result {
                Ok((cfg, record)) => {
                    print!("{}", summary_text(&record));
                    println!("results written to {}", cfg.output_dir().display());
                    verdict(&record)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_ERROR)
                }
            }
        }
        Command::Report { result_dir } => {
            let record = match ResultRecord::read(&result_dir) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", result_dir.display());
                    return ExitCode::from(EXIT_ERROR);
                }
            };
            let dir = if result_dir.is_dir() {
                result_dir.clone()
            } else {
                result_dir.parent().map(PathBuf::from).unwrap_or_default()
            };
            if let Err(e) = emit_report(&record, &dir) {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_ERROR);
            }
            print!("{}", summary_text(&record));
            if record.status == RunStatus::Failed {
                return ExitCode::from(EXIT_ERROR);
            }
            verdict(&record)
        }
        Command::Validate { config } => match ExperimentConfig::load(&config).and_then(|c| c.validate().map(|_| c)) {
            Ok(cfg) => {
                let labels = &cfg.ensemble.labels;
                let shown = if labels.len() > 6 {
                    format!("{} labels from {} to {}", labels.len(), labels[0], labels[labels.len() - 1])
                } else {
                    format!("labels {labels:?}")
                };
                println!("valid: {} on the {} with {shown}", cfg.kind().name(), cfg.experiment.model);
                ExitCode::from(EXIT_PASS)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_ERROR)
            }
        },
    }
}

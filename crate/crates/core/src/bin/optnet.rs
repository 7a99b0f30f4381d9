use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optnet::commands::{self, CommandError, RunOutcome};

#[derive(Parser)]
#[command(name = "optnet", version, about = "Run optimization networks and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic benchmark draw as data.csv plus truth.json.
    Generate {
        /// Benchmark shape as TOML; defaults to 1000 x 100 with 15 relevant features.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Compare methods over several seeds.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Directory for results.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a network TOML file, or replay a JSON report written by a previous run.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find inputs that drive fitted models to target outputs.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), CommandError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CommandError::Runtime(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Generate { config, seed, out } => {
            for path in commands::generate(config.as_deref(), seed, &out)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Benchmark {
            config,
            workers,
            out,
        } => {
            let table = commands::benchmark(&config, workers, out.as_deref())?;
            print!("{}", table.render());
        }
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => match commands::run(&config, seed, workers)? {
            RunOutcome::Fresh(report) => {
                if let Some(fs) = &report.result.feature_selection {
                    eprintln!(
                        "selected {} features, fitness {:.4}, test MAE {:.4}, {} evaluations",
                        fs.best_mask.count_selected(),
                        fs.fitness,
                        fs.best_model.test_mae.unwrap_or(f64::NAN),
                        fs.evaluations
                    );
                }
                emit(&commands::report_json(&report), out.as_ref())?;
            }
            RunOutcome::Replay { report, identical } => {
                emit(&commands::report_json(&report), out.as_ref())?;
                if !identical {
                    return Err(CommandError::Runtime(
                        "replay differs from the recorded result".into(),
                    ));
                }
                eprintln!("replay identical");
            }
        },
        Command::Analyze { config, seed, out } => {
            let report = commands::analyze(&config, seed)?;
            let best = report.best();
            eprintln!(
                "best inputs {:?}, residual {:.3e}, outputs {:?}",
                best.solution.inputs, best.solution.residual, best.solution.outputs
            );
            emit(&commands::analysis_json(&report), out.as_ref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Implementations behind the `optnet` subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, DataConfig, NetworkConfig, NodeSpec};
use crate::data::{generate_benchmark, write_csv, BenchmarkConfig};
use crate::engine::{NetworkRunResult, Payload};
use crate::experiment::{run_benchmark, ExperimentConfig, ResultTable};
use crate::networks::{
    finalize, optimization_analysis_network, AnalysisReport, AnalysisTask, InputSearch,
    NetworkResult, Recipe,
};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> CommandError {
    CommandError::Runtime(e.to_string())
}

fn read(path: &Path) -> Result<String, CommandError> {
    fs::read_to_string(path).map_err(|e| CommandError::Config(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CommandError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CommandError> {
    toml::from_str(&read(path)?).map_err(|e| CommandError::Config(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize to JSON")
}

/// Writes `data.csv`, `truth.json` and the generating `benchmark.toml` to `out`.
pub fn generate(
    config: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>, CommandError> {
    let benchmark: BenchmarkConfig = match config {
        Some(path) => parse_toml(path)?,
        None => BenchmarkConfig::default(),
    };
    benchmark
        .validate()
        .map_err(|e| CommandError::Config(e.to_string()))?;
    let (dataset, truth) = generate_benchmark(&benchmark, seed).map_err(runtime)?;
    fs::create_dir_all(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    let paths = [out.join("data.csv"), out.join("truth.json"), out.join("benchmark.toml")];
    write_csv(&dataset, &paths[0], "y").map_err(runtime)?;
    #[derive(Serialize)]
    struct Truth<'a> {
        seed: u64,
        #[serde(flatten)]
        truth: &'a crate::data::GroundTruth,
    }
    write(&paths[1], &to_json(&Truth { seed, truth: &truth }))?;
    write(&paths[2], &toml::to_string(&benchmark).expect("benchmark config serializes"))?;
    Ok(paths.to_vec())
}

/// Runs the comparison and writes `results.csv` into `out` when given.
pub fn benchmark(
    config: &Path,
    workers: Option<usize>,
    out: Option<&Path>,
) -> Result<ResultTable, CommandError> {
    let mut config: ExperimentConfig = parse_toml(config)?;
    if let Some(w) = workers {
        config.workers = w;
    }
    config
        .validate()
        .map_err(|e| CommandError::Config(e.to_string()))?;
    let table = run_benchmark(&config).map_err(runtime)?;
    if let Some(dir) = out {
        write(&dir.join("results.csv"), &table.to_csv())?;
    }
    Ok(table)
}

/// Deterministic part of a run report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub run: NetworkRunResult,
    /// Present when the network is a feature-selection network: the final
    /// search result refitted by its model node and scored on test data.
    pub feature_selection: Option<NetworkResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_time_s: f64,
}

/// Everything needed to rerun a network and compare the outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: NetworkConfig,
    pub result: RunSection,
    pub timing: Timing,
}

/// Builds and runs a network config. Relative data paths resolve against `base`.
pub fn run_network(config: &NetworkConfig, base: Option<&Path>) -> Result<RunReport, CommandError> {
    let start = Instant::now();
    let data = config.data.load(config.seed, base).map_err(CommandError::from_data)?;
    let (mut network, entry, termination) = config.build(&data.partitioned)?;
    let run = network
        .run(vec![entry], termination, config.workers)
        .map_err(runtime)?;
    let feature_selection = match &run.final_payload {
        Some(Payload::SearchResult(search)) => {
            let specs = config.specs()?;
            let models: Vec<_> = specs
                .iter()
                .filter_map(|(id, s)| match s {
                    NodeSpec::Model(m) => Some((id, m)),
                    _ => None,
                })
                .collect();
            let fitness = specs.iter().find_map(|(_, s)| match s {
                NodeSpec::FeatureSelectionOrchestrator(f) => Some(f),
                _ => None,
            });
            match (models.as_slice(), fitness) {
                ([(id, spec)], Some(fitness)) => {
                    let penalty = fitness.penalty(&data.partitioned).map_err(runtime)?;
                    Some(
                        finalize(
                            &data.partitioned,
                            spec,
                            config.model_seed(id),
                            (**search).clone(),
                            penalty,
                            start.elapsed(),
                        )
                        .map_err(runtime)?,
                    )
                }
                _ => None,
            }
        }
        _ => None,
    };
    Ok(RunReport {
        config: config.clone(),
        result: RunSection {
            run,
            feature_selection,
        },
        timing: Timing {
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

impl CommandError {
    fn from_data(e: crate::data::DataError) -> Self {
        CommandError::Config(e.to_string())
    }
}

pub enum RunOutcome {
    Fresh(RunReport),
    Replay {
        report: RunReport,
        /// Whether the result section serialized byte-for-byte as before.
        identical: bool,
    },
}

/// `config` is either a network TOML file or a JSON report to replay.
pub fn run(
    config: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
) -> Result<RunOutcome, CommandError> {
    let text = read(config)?;
    let base = config.parent();
    if config.extension().is_some_and(|e| e == "json") {
        let previous: RunReport = serde_json::from_str(&text)
            .map_err(|e| CommandError::Config(format!("{}: {e}", config.display())))?;
        let mut cfg = previous.config.clone();
        if let Some(w) = workers {
            cfg.workers = w;
        }
        let report = run_network(&cfg, base)?;
        let identical = to_json(&report.result) == to_json(&previous.result);
        return Ok(RunOutcome::Replay { report, identical });
    }
    let mut cfg = NetworkConfig::from_toml(&text, &config.display().to_string())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    Ok(RunOutcome::Fresh(run_network(&cfg, base)?))
}

pub fn report_json(report: &RunReport) -> String {
    to_json(report)
}

fn default_k() -> usize {
    1
}

/// Inverse analysis over one or more outputs, each with its own data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k: usize,
    pub outputs: Vec<DataConfig>,
    pub recipes: Vec<Recipe>,
    pub task: AnalysisTask,
    #[serde(default)]
    pub search: InputSearch,
}

pub fn analyze(
    config: &Path,
    seed: Option<u64>,
) -> Result<AnalysisReport, CommandError> {
    let mut cfg: AnalysisConfig = parse_toml(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if cfg.outputs.is_empty() || cfg.recipes.is_empty() {
        return Err(CommandError::Config(
            "analysis needs at least one output and one recipe".into(),
        ));
    }
    let datasets = cfg
        .outputs
        .iter()
        .enumerate()
        .map(|(j, d)| {
            d.load(derive_seed(cfg.seed, &format!("output-data/{j}")), config.parent())
                .map(|l| l.partitioned)
                .map_err(CommandError::from_data)
        })
        .collect::<Result<Vec<_>, _>>()?;
    optimization_analysis_network(&datasets, &cfg.recipes, cfg.k, &cfg.task, &cfg.search, cfg.seed)
        .map_err(|e| match e {
            crate::networks::NetworkError::InvalidK { .. }
            | crate::networks::NetworkError::InfeasibleBounds(..)
            | crate::networks::NetworkError::ModelInputMismatch(_)
            | crate::networks::NetworkError::InvalidSettings(_) => CommandError::Config(e.to_string()),
            other => runtime(other),
        })
}

pub fn analysis_json(report: &AnalysisReport) -> String {
    to_json(report)
}

//! Declarative network files.
//!
//! A network file is TOML with a seed, a data section, a node list, string
//! connections (`"a.out -> b.in"`), an entry message and a termination rule:
//!
//! ```toml
//! seed = 7
//! workers = 1
//! connections = ["selector.evaluation -> orchestrator.features"]
//!
//! [data]
//! source = "benchmark"
//!
//! [[nodes]]
//! id = "selector"
//! kind = "feature-selector"
//! [nodes.params]
//! init_density = 0.1
//!
//! [entry]
//! to = "selector.start"
//!
//! [termination]
//! final = "selector.result"
//! ```
//!
//! Node kinds and their `params`:
//!
//! | kind | params |
//! |---|---|
//! | `feature-selector` | `osga` (OSGA parameters), `init_density`, `crossover` |
//! | `feature-selection-orchestrator` | `penalty_per_feature` |
//! | `model` | `type = "ols" \| "random-forest" \| "tuned-forest"` plus its settings |
//!
//! Node params are kept verbatim, so a file round-trips without loss.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    generate_benchmark, load_csv, partition, BenchmarkConfig, DataError, Dataset, GroundTruth,
    PartitionRatios, PartitionedDataset,
};
use crate::engine::{
    Connection, EngineError, Entry, Network, NetworkBuilder, Node, Payload, TerminationRule,
};
use crate::engine::Endpoint;
use crate::networks::{
    FeatureSelectionOrchestrator, FeatureSelectorNode, FitnessConfig, ModelNode, ModelSpec,
};
use crate::osga::{BinaryCrossover, BinarySpace, OsgaParams};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("node `{node}`: {message}")]
    NodeParams { node: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Topology(Vec<crate::engine::TopologyError>),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl From<EngineError> for ConfigError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidTopology(errors) => ConfigError::Topology(errors),
            other => ConfigError::Invalid(other.to_string()),
        }
    }
}

/// Where observations come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// The synthetic sparse linear benchmark.
    Benchmark {
        #[serde(default)]
        benchmark: BenchmarkConfig,
    },
    Csv { path: PathBuf, target: String },
    /// `y = intercept + Σ w_i x_i + N(0, noise_sigma²)` with inputs drawn
    /// uniformly from `input_range`.
    LinearSystem {
        weights: Vec<f64>,
        #[serde(default)]
        intercept: f64,
        #[serde(default)]
        noise_sigma: f64,
        #[serde(default = "default_linear_rows")]
        n_observations: usize,
        #[serde(default = "default_input_range")]
        input_range: (f64, f64),
    },
}

fn default_linear_rows() -> usize {
    200
}

fn default_input_range() -> (f64, f64) {
    (-5.0, 5.0)
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Benchmark {
            benchmark: BenchmarkConfig::default(),
        }
    }
}

/// Unknown keys are rejected by the selected source variant.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(flatten)]
    pub source: DataSource,
    #[serde(default)]
    pub partition: PartitionRatios,
}

/// A loaded dataset, its split and, for synthetic data, the ground truth.
#[derive(Debug)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub partitioned: PartitionedDataset,
    pub truth: Option<GroundTruth>,
}

impl DataConfig {
    /// Loads or generates the data. Relative CSV paths resolve against `base`.
    pub fn load(&self, seed: u64, base: Option<&Path>) -> Result<LoadedData, DataError> {
        let (dataset, truth) = self.source.dataset(seed, base)?;
        let partitioned = partition(&dataset, self.partition, seed)?;
        Ok(LoadedData {
            dataset,
            partitioned,
            truth,
        })
    }
}

impl DataSource {
    pub fn dataset(
        &self,
        seed: u64,
        base: Option<&Path>,
    ) -> Result<(Dataset, Option<GroundTruth>), DataError> {
        match self {
            DataSource::Benchmark { benchmark } => {
                let (d, t) = generate_benchmark(benchmark, seed)?;
                Ok((d, Some(t)))
            }
            DataSource::Csv { path, target } => {
                let path = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                Ok((load_csv(&path, target)?, None))
            }
            DataSource::LinearSystem {
                weights,
                intercept,
                noise_sigma,
                n_observations,
                input_range,
            } => Ok((
                linear_system(weights, *intercept, *noise_sigma, *n_observations, *input_range, seed)?,
                None,
            )),
        }
    }
}

/// Samples a noisy linear system; used by the inverse-analysis examples.
pub fn linear_system(
    weights: &[f64],
    intercept: f64,
    noise_sigma: f64,
    n: usize,
    (lo, hi): (f64, f64),
    seed: u64,
) -> Result<Dataset, DataError> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    if !(lo < hi) || !(noise_sigma >= 0.0) || weights.is_empty() {
        return Err(DataError::InvalidConfig(format!(
            "linear system needs weights, lo < hi and noise_sigma >= 0 (got [{lo}, {hi}], {noise_sigma})"
        )));
    }
    let mut rng = crate::rng::named_stream(seed, "linear-system");
    let x = nalgebra::DMatrix::from_fn(n, weights.len(), |_, _| rng.random_range(lo..hi));
    let y = nalgebra::DVector::from_fn(n, |i, _| {
        let e: f64 = rng.sample(StandardNormal);
        intercept + (0..weights.len()).map(|j| weights[j] * x[(i, j)]).sum::<f64>() + noise_sigma * e
    });
    Dataset::with_default_names(x, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    FeatureSelector,
    FeatureSelectionOrchestrator,
    Model,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectorParams {
    pub osga: OsgaParams,
    pub init_density: f64,
    pub crossover: BinaryCrossover,
}

impl Default for SelectorParams {
    fn default() -> Self {
        let space = BinarySpace::new(0);
        Self {
            osga: OsgaParams::default(),
            init_density: space.init_density,
            crossover: space.crossover,
        }
    }
}

/// A node with typed parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeSpec {
    FeatureSelector(SelectorParams),
    FeatureSelectionOrchestrator(FitnessConfig),
    Model(ModelSpec),
}

impl NodeConfig {
    pub fn spec(&self) -> Result<NodeSpec, ConfigError> {
        let err = |e: toml::de::Error| ConfigError::NodeParams {
            node: self.id.clone(),
            message: e.message().to_string(),
        };
        let params = self.params.clone();
        Ok(match self.kind {
            NodeKind::FeatureSelector => NodeSpec::FeatureSelector(params.try_into().map_err(err)?),
            NodeKind::FeatureSelectionOrchestrator => {
                NodeSpec::FeatureSelectionOrchestrator(params.try_into().map_err(err)?)
            }
            NodeKind::Model => {
                let mut params = params;
                params
                    .entry("type")
                    .or_insert_with(|| toml::Value::String("ols".into()));
                NodeSpec::Model(params.try_into().map_err(err)?)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryConfig {
    pub to: Endpoint,
    /// Defaults to the feature count of the data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum TerminationConfig {
    Budget(usize),
    Final(Endpoint),
}

impl Default for TerminationConfig {
    fn default() -> Self {
        TerminationConfig::Final(Endpoint::new("selector", "result"))
    }
}

impl From<&TerminationConfig> for TerminationRule {
    fn from(t: &TerminationConfig) -> Self {
        match t {
            TerminationConfig::Budget(n) => TerminationRule::Budget(*n),
            TerminationConfig::Final(e) => TerminationRule::FinalPayload(e.clone()),
        }
    }
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub connections: Vec<Connection>,
    #[serde(default)]
    pub data: DataConfig,
    pub nodes: Vec<NodeConfig>,
    pub entry: EntryConfig,
    #[serde(default)]
    pub termination: TerminationConfig,
}

impl NetworkConfig {
    pub fn from_toml(text: &str, path: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("network config serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn specs(&self) -> Result<Vec<(String, NodeSpec)>, ConfigError> {
        self.nodes
            .iter()
            .map(|n| Ok((n.id.clone(), n.spec()?)))
            .collect()
    }

    /// Seed handed to a model node with this id.
    pub fn model_seed(&self, node: &str) -> u64 {
        derive_seed(self.seed, node)
    }

    /// Instantiates the nodes and wiring. Topology errors are returned
    /// verbatim from validation.
    pub fn build<'a>(
        &self,
        data: &'a PartitionedDataset,
    ) -> Result<(Network<'a>, Entry, TerminationRule), ConfigError> {
        let mut builder = NetworkBuilder::new(self.seed);
        for (id, spec) in self.specs()? {
            let node: Box<dyn Node + 'a> = match spec {
                NodeSpec::FeatureSelector(p) => Box::new(FeatureSelectorNode::new(
                    p.osga,
                    BinarySpace {
                        len: 0,
                        init_density: p.init_density,
                        crossover: p.crossover,
                    },
                )),
                NodeSpec::FeatureSelectionOrchestrator(f) => {
                    let penalty = f
                        .penalty(data)
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                    Box::new(FeatureSelectionOrchestrator::new(data, penalty))
                }
                NodeSpec::Model(m) => Box::new(ModelNode::new(m, self.model_seed(&id))),
            };
            builder = builder.node(&id, node);
        }
        for c in &self.connections {
            builder = builder.connection(c.clone());
        }
        let network = builder.build()?;
        let payload = self
            .entry
            .payload
            .clone()
            .unwrap_or(Payload::FeatureCount(data.n_features()));
        let termination = TerminationRule::from(&self.termination);
        Ok((network, Entry::new(self.entry.to.clone(), payload), termination))
    }
}

/// The three-node feature-selection network as a config.
pub fn feature_selection_config(seed: u64) -> NetworkConfig {
    let node = |id: &str, kind| NodeConfig {
        id: id.into(),
        kind,
        params: toml::Table::new(),
    };
    let mut model = node("model", NodeKind::Model);
    model.params.insert("type".into(), toml::Value::String("ols".into()));
    NetworkConfig {
        seed,
        workers: 1,
        connections: [
            "selector.evaluation -> orchestrator.features",
            "orchestrator.problem -> model.problem",
            "model.model -> orchestrator.model",
            "orchestrator.quality -> selector.quality",
        ]
        .iter()
        .map(|c| c.parse().expect("valid connection"))
        .collect(),
        data: DataConfig::default(),
        nodes: vec![
            node("selector", NodeKind::FeatureSelector),
            node("orchestrator", NodeKind::FeatureSelectionOrchestrator),
            model,
        ],
        entry: EntryConfig {
            to: Endpoint::new("selector", "start"),
            payload: None,
        },
        termination: TerminationConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE: &str = r#"
seed = 3
connections = [
  "selector.evaluation -> orchestrator.features",
  "orchestrator.problem → model.problem",
  "model.model -> orchestrator.model",
  "orchestrator.quality -> selector.quality",
]

[data]
source = "benchmark"
[data.benchmark]
n_observations = 120
n_features = 10
n_relevant = 3
[data.partition]
train = 0.5
validation = 0.25
test = 0.25

[[nodes]]
id = "selector"
kind = "feature-selector"
[nodes.params.osga]
population_size = 10
max_evaluations = 300

[[nodes]]
id = "orchestrator"
kind = "feature-selection-orchestrator"

[[nodes]]
id = "model"
kind = "model"
[nodes.params]
type = "ols"

[entry]
to = "selector.start"

[termination]
final = "selector.result"
"#;

    #[test]
    fn example_parses_and_round_trips() {
        let config = NetworkConfig::from_toml(EXAMPLE, "example").unwrap();
        assert_eq!(config.nodes.len(), 3);
        assert_eq!(config.workers, 1);
        let again = NetworkConfig::from_toml(&config.to_toml(), "again").unwrap();
        assert_eq!(again, config);
        let json = serde_json::to_string(&config).unwrap();
        assert_eq!(serde_json::from_str::<NetworkConfig>(&json).unwrap(), config);
    }

    #[test]
    fn example_builds_and_runs() {
        let config = NetworkConfig::from_toml(EXAMPLE, "example").unwrap();
        let data = config.data.load(config.seed, None).unwrap();
        let (mut network, entry, rule) = config.build(&data.partitioned).unwrap();
        let run = network.run(vec![entry], rule, 1).unwrap();
        assert!(matches!(run.final_payload, Some(Payload::SearchResult(_))));
        assert_eq!(data.partitioned.test_reads(), 0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = EXAMPLE.replace("population_size = 10", "population_size = 10\npopsize = 3");
        let config = NetworkConfig::from_toml(&bad, "bad").unwrap();
        let err = config.specs().unwrap_err().to_string();
        assert!(err.contains("selector") && err.contains("popsize"), "{err}");
        let bad = EXAMPLE.replace("seed = 3", "seed = 3\ncolour = 1");
        let err = NetworkConfig::from_toml(&bad, "bad.toml").unwrap_err().to_string();
        assert!(err.contains("bad.toml") && err.contains("colour"), "{err}");
        let bad = EXAMPLE.replace("n_relevant = 3", "n_relevant = 3\nrows = 4");
        assert!(NetworkConfig::from_toml(&bad, "bad").is_err());
        let bad = EXAMPLE.replace("source = \"benchmark\"", "source = \"benchmark\"\nfoo = 1");
        assert!(NetworkConfig::from_toml(&bad, "bad").is_err());
    }

    #[test]
    fn kind_mismatch_is_reported_verbatim() {
        let bad = EXAMPLE.replace(
            "\"model.model -> orchestrator.model\"",
            "\"model.model -> selector.quality\"",
        );
        let config = NetworkConfig::from_toml(&bad, "bad").unwrap();
        let data = config.data.load(config.seed, None).unwrap();
        let err = config.build(&data.partitioned).err().unwrap().to_string();
        assert!(err.contains("KindMismatch"), "{err}");
        assert!(err.contains("DuplicateWriter"), "{err}");
    }

    #[test]
    fn builtin_config_matches_direct_network() {
        let mut config = feature_selection_config(5);
        config.data.source = DataSource::Benchmark {
            benchmark: BenchmarkConfig {
                n_observations: 100,
                n_features: 8,
                n_relevant: 2,
                ..Default::default()
            },
        };
        config.nodes[0]
            .params
            .insert("osga".into(), toml::toml! { population_size = 10
                max_evaluations = 200 }.into());
        let data = config.data.load(config.seed, None).unwrap();
        let (mut network, entry, rule) = config.build(&data.partitioned).unwrap();
        let run = network.run(vec![entry], rule, 1).unwrap();
        let Some(Payload::SearchResult(search)) = run.final_payload else {
            panic!("no result")
        };
        let settings = crate::networks::FeatureSelectionSettings {
            osga: OsgaParams {
                population_size: 10,
                max_evaluations: 200,
                ..Default::default()
            },
            ..Default::default()
        };
        let direct =
            crate::networks::feature_selection_network(&data.partitioned, &settings, 5, 1).unwrap();
        assert_eq!(*search, direct.search);
    }

    #[test]
    fn linear_system_data() {
        let d = linear_system(&[2.0, -1.0], 0.5, 0.0, 20, (0.0, 1.0), 1).unwrap();
        for i in 0..20 {
            let x = d.features();
            let expect = 0.5 + 2.0 * x[(i, 0)] - x[(i, 1)];
            assert!((d.target()[i] - expect).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn termination_round_trips(budget in 1usize..10_000) {
            let mut config = feature_selection_config(budget as u64);
            config.termination = TerminationConfig::Budget(budget);
            config.workers = budget % 7 + 1;
            let back = NetworkConfig::from_toml(&config.to_toml(), "p").unwrap();
            prop_assert_eq!(back, config);
        }
    }
}

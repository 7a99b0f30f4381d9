//! Benchmark comparison across methods and seeds.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    generate_benchmark, partition, BenchmarkConfig, FeatureMask, GroundTruth, PartitionRatios,
    PartitionedDataset,
};
use crate::forest::ForestConfig;
use crate::linear::{default_lambda_grid, default_p_grid, grid_search_elastic_net, mae};
use crate::networks::{
    build_model_pool, feature_selection_network, fit_model, nested_tuning_network,
    optimize_inputs, select_model_subset, AnalysisTask, FeatureSelectionSettings, InnerSearch,
    InputSearch, ModelSpec, NetworkError, Recipe, SubsetCriterion, DEFAULT_INNER_BUDGET,
};
use crate::rng::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FullOls,
    OracleOls,
    ElasticNetGrid,
    FsNetworkOls,
    FsNetworkRf,
    NestedRf,
    OptimizationAnalysis,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::FullOls => "full-ols",
            Method::OracleOls => "oracle-ols",
            Method::ElasticNetGrid => "elastic-net-grid",
            Method::FsNetworkOls => "fs-network-ols",
            Method::FsNetworkRf => "fs-network-rf",
            Method::NestedRf => "nested-rf",
            Method::OptimizationAnalysis => "optimization-analysis",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElasticNetSettings {
    pub lambda_grid: Option<Vec<f64>>,
    pub p_grid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NestedSettings {
    pub outer: FeatureSelectionSettings,
    pub base: ForestConfig,
    pub search: InnerSearch,
    pub budget: usize,
}

impl Default for NestedSettings {
    fn default() -> Self {
        Self {
            outer: FeatureSelectionSettings::default(),
            base: ForestConfig::default(),
            search: InnerSearch::default(),
            budget: DEFAULT_INNER_BUDGET,
        }
    }
}

/// Pool, pick the best model and invert it towards the median training
/// target within `input_bounds` for every feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkAnalysisSettings {
    pub recipes: Vec<Recipe>,
    pub input_bounds: (f64, f64),
    pub search: InputSearch,
}

impl Default for BenchmarkAnalysisSettings {
    fn default() -> Self {
        Self {
            recipes: vec![
                Recipe::Ols,
                Recipe::ElasticNet {
                    lambda_grid: None,
                    p_grid: None,
                },
            ],
            input_bounds: (-3.0, 3.0),
            search: InputSearch::default(),
        }
    }
}

fn forest_settings() -> FeatureSelectionSettings {
    FeatureSelectionSettings {
        model: ModelSpec::RandomForest {
            forest: ForestConfig::default(),
        },
        ..Default::default()
    }
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub benchmark: BenchmarkConfig,
    #[serde(default)]
    pub partition: PartitionRatios,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub elastic_net: ElasticNetSettings,
    #[serde(default)]
    pub fs_network_ols: FeatureSelectionSettings,
    #[serde(default = "forest_settings")]
    pub fs_network_rf: FeatureSelectionSettings,
    #[serde(default)]
    pub nested_rf: NestedSettings,
    #[serde(default)]
    pub optimization_analysis: BenchmarkAnalysisSettings,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn new(seeds: Vec<u64>, methods: Vec<Method>) -> Self {
        Self {
            benchmark: BenchmarkConfig::default(),
            partition: PartitionRatios::default(),
            seeds,
            methods,
            workers: 1,
            elastic_net: ElasticNetSettings::default(),
            fs_network_ols: FeatureSelectionSettings::default(),
            fs_network_rf: forest_settings(),
            nested_rf: NestedSettings::default(),
            optimization_analysis: BenchmarkAnalysisSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::Invalid("at least one seed is required".into()));
        }
        if self.methods.is_empty() {
            return Err(ExperimentError::Invalid("at least one method is required".into()));
        }
        self.benchmark
            .validate()
            .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        self.partition
            .validate()
            .map_err(|e| ExperimentError::Invalid(e.to_string()))
    }
}

/// One (method, seed) cell of the comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub seed: u64,
    pub test_mae: Option<f64>,
    pub n_features: Option<usize>,
    pub correct_features: Option<usize>,
    pub evaluations: Option<usize>,
    /// Seconds.
    pub wall_time: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("rows serialize to CSV");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV is UTF-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, csv::Error> {
        let rows = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<Vec<ResultRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Mean test MAE over the rows of a method that produced one.
    pub fn mean_test_mae(&self, method: Method) -> Option<f64> {
        let values: Vec<f64> = self.rows_for(method).filter_map(|r| r.test_mae).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    /// Aligned text table followed by per-method means.
    pub fn render(&self) -> String {
        let opt = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
        let mut out = format!(
            "{:<22} {:>6} {:>10} {:>6} {:>8} {:>8} {:>9}\n",
            "method", "seed", "test_mae", "feats", "correct", "evals", "time_s"
        );
        for r in &self.rows {
            let mae = match (&r.error, r.test_mae) {
                (Some(_), _) => "failed".to_string(),
                (None, Some(m)) => format!("{m:.3}"),
                (None, None) => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{:<22} {:>6} {:>10} {:>6} {:>8} {:>8} {:>9.2}",
                r.method.name(),
                r.seed,
                mae,
                opt(r.n_features),
                opt(r.correct_features),
                opt(r.evaluations),
                r.wall_time
            );
        }
        out.push_str("\nmeans\n");
        let mut methods: Vec<Method> = self.rows.iter().map(|r| r.method).collect();
        methods.dedup();
        methods.sort();
        methods.dedup();
        for m in methods {
            let rows: Vec<&ResultRow> = self.rows_for(m).collect();
            let mean = |f: &dyn Fn(&ResultRow) -> Option<f64>| {
                let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let fmt = |v: Option<f64>, p: usize| v.map_or("-".into(), |v| format!("{v:.p$}"));
            let _ = writeln!(
                out,
                "{:<22} {:>6} {:>10} {:>6} {:>8} {:>8} {:>9}",
                m.name(),
                rows.len(),
                fmt(mean(&|r| r.test_mae), 3),
                fmt(mean(&|r| r.n_features.map(|v| v as f64)), 1),
                fmt(mean(&|r| r.correct_features.map(|v| v as f64)), 1),
                fmt(mean(&|r| r.evaluations.map(|v| v as f64)), 0),
                fmt(mean(&|r| Some(r.wall_time)), 2),
            );
        }
        out
    }
}

/// What a single method produced before timing is attached.
struct Outcome {
    test_mae: f64,
    selected: Vec<usize>,
    evaluations: Option<usize>,
}

fn ols_on(data: &PartitionedDataset, columns: &[usize]) -> Result<Outcome, NetworkError> {
    let mask = FeatureMask::from_indices(data.n_features(), columns);
    let model = fit_model(&ModelSpec::Ols, &data.problem(&mask)?, 0)?;
    let test = data.test();
    let predicted = model.predict_full(test.features())?;
    Ok(Outcome {
        test_mae: mae(predicted.as_slice(), test.target().as_slice())?,
        selected: columns.to_vec(),
        evaluations: None,
    })
}

fn run_method(
    config: &ExperimentConfig,
    method: Method,
    data: &PartitionedDataset,
    truth: &GroundTruth,
    seed: u64,
) -> Result<Outcome, NetworkError> {
    let method_seed = derive_seed(seed, method.name());
    let network = |r: crate::networks::NetworkResult| Outcome {
        test_mae: r.best_model.test_mae.unwrap_or(f64::NAN),
        selected: r.best_mask.selected(),
        evaluations: Some(r.evaluations),
    };
    match method {
        Method::FullOls => ols_on(data, &(0..data.n_features()).collect::<Vec<_>>()),
        Method::OracleOls => ols_on(data, &truth.true_indices),
        Method::ElasticNetGrid => {
            let lambdas = config
                .elastic_net
                .lambda_grid
                .clone()
                .unwrap_or_else(default_lambda_grid);
            let ps = config.elastic_net.p_grid.clone().unwrap_or_else(default_p_grid);
            let grid = grid_search_elastic_net(data, &lambdas, &ps)?;
            let w = &grid.best_model.weights;
            Ok(Outcome {
                test_mae: grid.test_mae,
                selected: (0..w.len()).filter(|&j| w[j].abs() > 1e-10).collect(),
                evaluations: Some(grid.cells.len()),
            })
        }
        Method::FsNetworkOls => Ok(network(feature_selection_network(
            data,
            &config.fs_network_ols,
            method_seed,
            config.workers,
        )?)),
        Method::FsNetworkRf => Ok(network(feature_selection_network(
            data,
            &config.fs_network_rf,
            method_seed,
            config.workers,
        )?)),
        Method::NestedRf => {
            let n = &config.nested_rf;
            Ok(network(nested_tuning_network(
                data,
                &n.outer,
                &n.base,
                &n.search,
                n.budget,
                method_seed,
                config.workers,
            )?))
        }
        Method::OptimizationAnalysis => {
            let settings = &config.optimization_analysis;
            let pool = build_model_pool(data, &settings.recipes, method_seed)?;
            let best = select_model_subset(&pool, 1, SubsetCriterion::ValidationMae)?.remove(0);
            let mut y: Vec<f64> = data.train().target().iter().copied().collect();
            y.sort_by(f64::total_cmp);
            let task = AnalysisTask {
                target_outputs: vec![y[y.len() / 2]],
                input_bounds: vec![settings.input_bounds; data.n_features()],
                fixed_inputs: Vec::new(),
            };
            let solution =
                optimize_inputs(std::slice::from_ref(&best), &task, &settings.search, method_seed)?;
            Ok(Outcome {
                test_mae: best.test_mae.unwrap_or(f64::NAN),
                selected: best.columns.clone(),
                evaluations: Some(solution.evaluations),
            })
        }
    }
}

/// Runs every configured method on every seed. Each seed generates one
/// dataset shared by all methods; failures are recorded per cell.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    config.validate()?;
    let mut table = ResultTable::default();
    for &seed in &config.seeds {
        let generated = generate_benchmark(&config.benchmark, seed)
            .and_then(|(d, t)| Ok((partition(&d, config.partition, seed)?, t)));
        for &method in &config.methods {
            let start = Instant::now();
            let outcome = generated
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|(data, truth)| {
                    run_method(config, method, data, truth, seed)
                        .map(|o| (o, truth))
                        .map_err(|e| e.to_string())
                });
            let wall_time = start.elapsed().as_secs_f64();
            table.rows.push(match outcome {
                Ok((o, truth)) => ResultRow {
                    method,
                    seed,
                    test_mae: Some(o.test_mae),
                    n_features: Some(o.selected.len()),
                    correct_features: Some(truth.count_correct(&o.selected)),
                    evaluations: o.evaluations,
                    wall_time,
                    error: None,
                },
                Err(e) => ResultRow {
                    method,
                    seed,
                    test_mae: None,
                    n_features: None,
                    correct_features: None,
                    evaluations: None,
                    wall_time,
                    error: Some(e),
                },
            });
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osga::OsgaParams;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            vec![1, 2],
            vec![Method::FullOls, Method::OracleOls, Method::FsNetworkOls],
        );
        c.benchmark = BenchmarkConfig {
            n_observations: 300,
            n_features: 20,
            n_relevant: 4,
            ..Default::default()
        };
        c.fs_network_ols.osga = OsgaParams {
            population_size: 20,
            max_evaluations: 600,
            ..Default::default()
        };
        c
    }

    #[test]
    fn rows_per_method_and_seed() {
        let table = run_benchmark(&small()).unwrap();
        assert_eq!(table.rows.len(), 6);
        let fs: Vec<&ResultRow> = table.rows_for(Method::FsNetworkOls).collect();
        assert!(fs.iter().all(|r| r.evaluations.unwrap() <= 600 && r.error.is_none()));
        let full = table.rows_for(Method::FullOls).next().unwrap();
        assert_eq!(full.n_features, Some(20));
        assert_eq!(full.correct_features, Some(4));
        assert!(table.render().contains("fs-network-ols"));
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let mut table = run_benchmark(&small()).unwrap();
        table.rows[0].error = Some("boom, \"quoted\"".into());
        table.rows[0].test_mae = None;
        let text = table.to_csv();
        let back = ResultTable::from_csv(&text).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn empty_methods_are_rejected() {
        let c = ExperimentConfig::new(vec![1], vec![]);
        assert!(run_benchmark(&c).is_err());
        let c = ExperimentConfig::new(vec![], vec![Method::FullOls]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let ok = "seeds = [1]\nmethods = [\"full-ols\", \"nested-rf\"]\n";
        let c: ExperimentConfig = toml::from_str(ok).unwrap();
        assert_eq!(c.methods, vec![Method::FullOls, Method::NestedRf]);
        assert!(toml::from_str::<ExperimentConfig>(&format!("{ok}typo = 1\n")).is_err());
        assert!(toml::from_str::<ExperimentConfig>("seeds = [1]\nmethods = [\"lasso\"]").is_err());
    }
}

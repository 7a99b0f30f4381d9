//! Concrete networks: feature selection wrapped around a regression node,
//! nested hyperparameter tuning, and the model-pool optimization analysis.

mod analysis;
mod feature_selection;
mod nodes;
mod tuning;

use std::time::Duration;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset, FeatureMask, PartitionedDataset, RegressionProblem};
use crate::engine::EngineError;
use crate::forest::{fit_random_forest, ForestConfig, ForestError};
use crate::linear::{fit_ols, mae, LinearError};
use crate::model::{Model, ModelError, ModelWithQuality};
use crate::osga::{OsgaError, RunResult};
use crate::rng::derive_seed;

pub use analysis::{
    build_model_pool, optimization_analysis_network, optimize_inputs, select_model_subset,
    AnalysisCandidate, AnalysisReport, AnalysisTask, InputSearch, InputSolution, PoolEntry,
    Recipe, SubsetCriterion,
};
pub use feature_selection::{
    feature_selection_direct, feature_selection_network, FeatureSelectionSettings,
    MODEL_NODE, ORCHESTRATOR_NODE, SELECTOR_NODE,
};
pub use nodes::{FeatureSelectionOrchestrator, FeatureSelectorNode, ModelNode};
pub use tuning::{
    nested_tuning_network, tune_forest, InnerSearch, ParameterGrid, ParameterTunerNode,
    TuningEvaluatorNode, DEFAULT_INNER_BUDGET,
};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Osga(#[from] OsgaError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("network finished without a result: {0}")]
    MissingResult(String),
    #[error("InvalidK: k = {k} but the pool holds {available} usable models")]
    InvalidK { k: usize, available: usize },
    #[error("InfeasibleBounds: {0}")]
    InfeasibleBounds(String),
    #[error("ModelInputMismatch: {0}")]
    ModelInputMismatch(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
}

/// The regression node plugged into a feature-selection network.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    #[default]
    Ols,
    RandomForest {
        #[serde(default)]
        forest: ForestConfig,
    },
    /// A forest whose `(r, m, n_trees)` are chosen per problem by an inner
    /// network.
    TunedForest {
        #[serde(default)]
        base: ForestConfig,
        #[serde(default)]
        search: InnerSearch,
        #[serde(default = "default_inner_budget")]
        budget: usize,
    },
}

fn default_inner_budget() -> usize {
    DEFAULT_INNER_BUDGET
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitnessConfig {
    /// Added to the validation MAE per selected feature. `None` uses
    /// [`default_penalty`].
    pub penalty_per_feature: Option<f64>,
}

impl FitnessConfig {
    pub fn penalty(&self, data: &PartitionedDataset) -> Result<f64, NetworkError> {
        match self.penalty_per_feature {
            Some(p) if p >= 0.0 && p.is_finite() => Ok(p),
            Some(p) => Err(NetworkError::InvalidSettings(format!(
                "penalty_per_feature {p}"
            ))),
            None => default_penalty(data),
        }
    }
}

/// Share of the constant model's validation MAE that the default penalty
/// spreads over all features.
pub const DEFAULT_PENALTY_FACTOR: f64 = 0.25;

/// `DEFAULT_PENALTY_FACTOR · null validation MAE / n_features`.
///
/// Smaller factors let features that only fit validation noise into the
/// mask; on the 1000 × 100 benchmark a factor of 0.01 yields masks of 30 to
/// 50 features and a test MAE several percent above the oracle model.
pub fn default_penalty(data: &PartitionedDataset) -> Result<f64, NetworkError> {
    let null = null_validation_mae(data)?;
    Ok(DEFAULT_PENALTY_FACTOR * null / data.n_features().max(1) as f64)
}

/// Validation MAE of the model predicting the training mean.
pub fn null_validation_mae(data: &PartitionedDataset) -> Result<f64, NetworkError> {
    let mean = data.train().target().mean();
    let y = data.validation().target();
    Ok(mae(&vec![mean; y.len()], y.as_slice())?)
}

/// Fitness of a scored model: validation MAE plus the size penalty.
pub fn fitness(model: &ModelWithQuality, penalty: f64) -> f64 {
    model.validation_mae + penalty * model.n_features as f64
}

/// Stable text key for a column set, used to derive per-problem seeds.
pub(crate) fn columns_key(columns: &[usize]) -> String {
    let parts: Vec<String> = columns.iter().map(usize::to_string).collect();
    parts.join(",")
}

fn dataset_mae(model: &Model, data: &Dataset) -> Result<f64, NetworkError> {
    let predicted: DVector<f64> = model.predict(data.features())?;
    Ok(mae(predicted.as_slice(), data.target().as_slice())?)
}

pub(crate) fn score(
    model: Model,
    problem: &RegressionProblem,
    rank_deficient: bool,
) -> Result<ModelWithQuality, NetworkError> {
    Ok(ModelWithQuality {
        train_mae: dataset_mae(&model, &problem.train)?,
        validation_mae: dataset_mae(&model, &problem.validation)?,
        model,
        columns: problem.columns.clone(),
        n_features: problem.columns.len(),
        test_mae: None,
        rank_deficient,
        tuning: None,
    })
}

/// Forest settings with `[r, m, n_trees]` overrides applied.
pub(crate) fn forest_with_parameters(
    base: &ForestConfig,
    parameters: Option<&[f64]>,
) -> Result<ForestConfig, NetworkError> {
    let Some(p) = parameters else {
        return Ok(base.clone());
    };
    let [r, m, n] = p else {
        return Err(NetworkError::InvalidSettings(format!(
            "expected [sample_ratio, feature_ratio, n_trees], got {p:?}"
        )));
    };
    Ok(ForestConfig {
        sample_ratio: *r,
        feature_ratio: *m,
        n_trees: n.round().max(1.0) as usize,
        ..base.clone()
    })
}

/// Fits the model described by `spec` on the problem's training rows and
/// scores it on train and validation. Randomized fits derive their seed from
/// `seed` and the column set, so the result does not depend on call order.
pub fn fit_model(
    spec: &ModelSpec,
    problem: &RegressionProblem,
    seed: u64,
) -> Result<ModelWithQuality, NetworkError> {
    match spec {
        ModelSpec::Ols => {
            let fit = fit_ols(problem.train.features(), problem.train.target())?;
            let mut model = fit.model;
            model.feature_names = problem.train.feature_names().to_vec();
            score(Model::Linear(model), problem, fit.rank_deficient)
        }
        ModelSpec::RandomForest { forest } => {
            let config = forest_with_parameters(forest, problem.parameters.as_deref())?;
            let tree_seed = derive_seed(seed, &columns_key(&problem.columns));
            let mut model = fit_random_forest(
                problem.train.features(),
                problem.train.target(),
                &config,
                tree_seed,
            )?;
            model.feature_names = problem.train.feature_names().to_vec();
            score(Model::Forest(model), problem, false)
        }
        ModelSpec::TunedForest {
            base,
            search,
            budget,
        } => tune_forest(problem, base, search, *budget, seed),
    }
}

/// Outcome of a feature-selection network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkResult {
    pub best_mask: FeatureMask,
    /// Refitted from `best_mask`, with its test MAE.
    pub best_model: ModelWithQuality,
    /// Validation MAE plus the size penalty of the best mask.
    pub fitness: f64,
    pub penalty_per_feature: f64,
    pub evaluations: usize,
    pub search: RunResult<FeatureMask>,
    /// Not serialized; reports keep timing in their own section.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl NetworkResult {
    /// Equality of everything except timing.
    pub fn same_outcome(&self, other: &NetworkResult) -> bool {
        self.best_mask == other.best_mask
            && self.best_model == other.best_model
            && self.fitness.to_bits() == other.fitness.to_bits()
            && self.penalty_per_feature.to_bits() == other.penalty_per_feature.to_bits()
            && self.evaluations == other.evaluations
            && self.search == other.search
    }
}

/// Refits the winning mask and reads the test partition once.
pub fn finalize(
    data: &PartitionedDataset,
    spec: &ModelSpec,
    model_seed: u64,
    search: RunResult<FeatureMask>,
    penalty: f64,
    wall_time: Duration,
) -> Result<NetworkResult, NetworkError> {
    let mask = search.best.genome.clone();
    let mut best_model = fit_model(spec, &data.problem(&mask)?, model_seed)?;
    let test = data.test();
    let predicted = best_model.predict_full(test.features())?;
    best_model.test_mae = Some(mae(predicted.as_slice(), test.target().as_slice())?);
    Ok(NetworkResult {
        best_mask: mask,
        fitness: fitness(&best_model, penalty),
        best_model,
        penalty_per_feature: penalty,
        evaluations: search.evaluations,
        search,
        wall_time,
    })
}

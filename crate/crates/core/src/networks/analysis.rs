use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMask, PartitionedDataset};
use crate::linear::{default_lambda_grid, default_p_grid, grid_search_elastic_net, mae, LinearModel};
use crate::model::{Model, ModelWithQuality};
use crate::osga::{osga_minimize, OsgaParams, RealCrossover, RealSpace};
use crate::rng::{derive_seed, named_stream};

use super::{
    feature_selection_network, fit_model, score, FeatureSelectionSettings, ModelSpec,
    NetworkError,
};

/// How one pool member is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Recipe {
    /// OLS on all features.
    Ols,
    /// Best cell of an elastic-net grid search; grids default to the
    /// standard λ and p grids.
    ElasticNet {
        lambda_grid: Option<Vec<f64>>,
        p_grid: Option<Vec<f64>>,
    },
    RandomForest {
        #[serde(default)]
        forest: crate::forest::ForestConfig,
    },
    FeatureSelection {
        #[serde(default)]
        settings: FeatureSelectionSettings,
    },
}

impl Recipe {
    pub fn label(&self) -> &'static str {
        match self {
            Recipe::Ols => "ols",
            Recipe::ElasticNet { .. } => "elastic-net",
            Recipe::RandomForest { .. } => "random-forest",
            Recipe::FeatureSelection { .. } => "feature-selection",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub recipe: usize,
    pub label: String,
    /// The fitted model, or the error message of a failed recipe.
    pub outcome: Result<ModelWithQuality, String>,
}

fn with_test_mae(
    data: &PartitionedDataset,
    mut model: ModelWithQuality,
) -> Result<ModelWithQuality, NetworkError> {
    let test = data.test();
    let predicted = model.predict_full(test.features())?;
    model.test_mae = Some(mae(predicted.as_slice(), test.target().as_slice())?);
    Ok(model)
}

fn run_recipe(
    data: &PartitionedDataset,
    recipe: &Recipe,
    seed: u64,
) -> Result<ModelWithQuality, NetworkError> {
    let all = FeatureMask::all(data.n_features());
    match recipe {
        Recipe::Ols => with_test_mae(data, fit_model(&ModelSpec::Ols, &data.problem(&all)?, seed)?),
        Recipe::RandomForest { forest } => {
            let spec = ModelSpec::RandomForest {
                forest: forest.clone(),
            };
            with_test_mae(data, fit_model(&spec, &data.problem(&all)?, seed)?)
        }
        Recipe::ElasticNet { lambda_grid, p_grid } => {
            let lambdas = lambda_grid.clone().unwrap_or_else(default_lambda_grid);
            let ps = p_grid.clone().unwrap_or_else(default_p_grid);
            let grid = grid_search_elastic_net(data, &lambdas, &ps)?;
            // Keep only the columns with non-zero weight.
            let full = &grid.best_model;
            let columns: Vec<usize> = (0..full.weights.len())
                .filter(|&j| full.weights[j].abs() > 1e-10)
                .collect();
            let reduced = LinearModel {
                weights: columns.iter().map(|&j| full.weights[j]).collect(),
                intercept: full.intercept,
                feature_names: columns.iter().map(|&j| full.feature_names[j].clone()).collect(),
            };
            let problem = data.problem(&FeatureMask::from_indices(data.n_features(), &columns))?;
            let mut model = score(Model::Linear(reduced), &problem, false)?;
            model.test_mae = Some(grid.test_mae);
            Ok(model)
        }
        Recipe::FeatureSelection { settings } => {
            Ok(feature_selection_network(data, settings, seed, 1)?.best_model)
        }
    }
}

/// Runs every recipe on the same data. All recipes share one derived seed,
/// so identical recipes yield identical models; failures are recorded and
/// do not stop the pool.
pub fn build_model_pool(
    data: &PartitionedDataset,
    recipes: &[Recipe],
    seed: u64,
) -> Result<Vec<PoolEntry>, NetworkError> {
    if recipes.is_empty() {
        return Err(NetworkError::InvalidSettings("model pool needs a recipe".into()));
    }
    let recipe_seed = derive_seed(seed, "pool");
    Ok(recipes
        .par_iter()
        .enumerate()
        .map(|(i, recipe)| PoolEntry {
            recipe: i,
            label: recipe.label().to_string(),
            outcome: run_recipe(data, recipe, recipe_seed).map_err(|e| e.to_string()),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetCriterion {
    #[default]
    ValidationMae,
    TrainMae,
}

/// The `k` best successful pool models, ordered by the criterion, then by
/// fewer features, then by pool order.
pub fn select_model_subset(
    pool: &[PoolEntry],
    k: usize,
    criterion: SubsetCriterion,
) -> Result<Vec<ModelWithQuality>, NetworkError> {
    let mut usable: Vec<&ModelWithQuality> =
        pool.iter().filter_map(|e| e.outcome.as_ref().ok()).collect();
    if k == 0 || k > usable.len() {
        return Err(NetworkError::InvalidK {
            k,
            available: usable.len(),
        });
    }
    let key = |m: &ModelWithQuality| match criterion {
        SubsetCriterion::ValidationMae => m.validation_mae,
        SubsetCriterion::TrainMae => m.train_mae,
    };
    usable.sort_by(|a, b| {
        key(a)
            .total_cmp(&key(b))
            .then(a.n_features.cmp(&b.n_features))
    });
    Ok(usable.into_iter().take(k).cloned().collect())
}

/// Inverse problem: find inputs within bounds whose predicted outputs hit
/// the targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisTask {
    pub target_outputs: Vec<f64>,
    pub input_bounds: Vec<(f64, f64)>,
    /// `(input index, value)` pairs held constant during the search.
    #[serde(default)]
    pub fixed_inputs: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputSearch {
    pub osga: OsgaParams,
    pub crossover: RealCrossover,
    pub sigma_fraction: f64,
}

impl Default for InputSearch {
    fn default() -> Self {
        let space = RealSpace::new(Vec::new());
        Self {
            osga: OsgaParams {
                population_size: 50,
                ..Default::default()
            },
            crossover: space.crossover,
            sigma_fraction: space.sigma_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSolution {
    pub inputs: Vec<f64>,
    /// Sum of squared deviations from the targets.
    pub residual: f64,
    pub outputs: Vec<f64>,
    pub evaluations: usize,
}

fn check_task(models: &[ModelWithQuality], task: &AnalysisTask) -> Result<(), NetworkError> {
    let n = task.input_bounds.len();
    for (i, &(lo, hi)) in task.input_bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(NetworkError::InfeasibleBounds(format!(
                "input {i}: [{lo}, {hi}]"
            )));
        }
    }
    for &(i, v) in &task.fixed_inputs {
        let Some(&(lo, hi)) = task.input_bounds.get(i) else {
            return Err(NetworkError::InfeasibleBounds(format!(
                "fixed input {i} is outside the {n} declared inputs"
            )));
        };
        if !(lo..=hi).contains(&v) {
            return Err(NetworkError::InfeasibleBounds(format!(
                "fixed input {i} = {v} lies outside [{lo}, {hi}]"
            )));
        }
    }
    if models.len() != task.target_outputs.len() {
        return Err(NetworkError::ModelInputMismatch(format!(
            "{} models for {} target outputs",
            models.len(),
            task.target_outputs.len()
        )));
    }
    for (j, m) in models.iter().enumerate() {
        if let Some(&c) = m.columns.iter().find(|&&c| c >= n) {
            return Err(NetworkError::ModelInputMismatch(format!(
                "model {j} reads input {c}, but only {n} inputs are bounded"
            )));
        }
    }
    Ok(())
}

/// Minimizes `Σ_j (model_j(x) − target_j)²` over the free inputs with a
/// real-coded OSGA.
pub fn optimize_inputs(
    models: &[ModelWithQuality],
    task: &AnalysisTask,
    search: &InputSearch,
    seed: u64,
) -> Result<InputSolution, NetworkError> {
    check_task(models, task)?;
    let mut base: Vec<f64> = task.input_bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    let mut fixed = vec![false; base.len()];
    for &(i, v) in &task.fixed_inputs {
        base[i] = v;
        fixed[i] = true;
    }
    let free: Vec<usize> = (0..base.len()).filter(|&i| !fixed[i]).collect();
    let assemble = |genome: &[f64]| {
        let mut x = base.clone();
        for (&i, &v) in free.iter().zip(genome) {
            x[i] = v;
        }
        x
    };
    let outputs_at = |x: &[f64]| -> Result<Vec<f64>, NetworkError> {
        models
            .iter()
            .map(|m| m.predict_point(x).map_err(NetworkError::from))
            .collect()
    };
    let residual_of = |outputs: &[f64]| -> f64 {
        outputs
            .iter()
            .zip(&task.target_outputs)
            .map(|(o, t)| (o - t).powi(2))
            .sum()
    };

    let (inputs, evaluations) = if free.is_empty() {
        (base.clone(), 1)
    } else {
        let space = RealSpace {
            bounds: free.iter().map(|&i| task.input_bounds[i]).collect(),
            crossover: search.crossover,
            sigma_fraction: search.sigma_fraction,
        };
        let run = osga_minimize(
            space,
            search.osga.clone(),
            named_stream(seed, "inputs"),
            |genome: &Vec<f64>| outputs_at(&assemble(genome)).map(|o| residual_of(&o)),
        )?;
        (assemble(&run.best.genome), run.evaluations)
    };
    let outputs = outputs_at(&inputs)?;
    Ok(InputSolution {
        residual: residual_of(&outputs),
        inputs,
        outputs,
        evaluations,
    })
}

/// One assignment of subset models to outputs and its inverse solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisCandidate {
    /// Position in each output's subset.
    pub choice: Vec<usize>,
    pub solution: InputSolution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub k: usize,
    /// Model pool per output.
    pub pools: Vec<Vec<PoolEntry>>,
    /// Selected models per output.
    pub subsets: Vec<Vec<ModelWithQuality>>,
    /// Ranked by residual, best first.
    pub candidates: Vec<AnalysisCandidate>,
}

impl AnalysisReport {
    pub fn best(&self) -> &AnalysisCandidate {
        &self.candidates[0]
    }
}

fn combinations(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &s in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..s).map(move |i| {
                    let mut c = prefix.clone();
                    c.push(i);
                    c
                })
            })
            .collect();
    }
    out
}

/// Model pool, subset selection and inverse optimization in sequence. One
/// dataset per target output supplies that output's models; every
/// combination of subset members is optimized and the results ranked.
pub fn optimization_analysis_network(
    datasets: &[PartitionedDataset],
    recipes: &[Recipe],
    k: usize,
    task: &AnalysisTask,
    search: &InputSearch,
    seed: u64,
) -> Result<AnalysisReport, NetworkError> {
    if datasets.len() != task.target_outputs.len() {
        return Err(NetworkError::ModelInputMismatch(format!(
            "{} datasets for {} target outputs",
            datasets.len(),
            task.target_outputs.len()
        )));
    }
    if let Some(d) = datasets.iter().find(|d| d.n_features() != task.input_bounds.len()) {
        return Err(NetworkError::ModelInputMismatch(format!(
            "dataset has {} inputs but {} bounds are given",
            d.n_features(),
            task.input_bounds.len()
        )));
    }
    let pools = datasets
        .iter()
        .enumerate()
        .map(|(j, d)| build_model_pool(d, recipes, derive_seed(seed, &format!("output/{j}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let subsets = pools
        .iter()
        .map(|pool| select_model_subset(pool, k, SubsetCriterion::ValidationMae))
        .collect::<Result<Vec<_>, _>>()?;
    let sizes: Vec<usize> = subsets.iter().map(Vec::len).collect();
    let mut candidates = combinations(&sizes)
        .into_par_iter()
        .map(|choice| {
            let models: Vec<ModelWithQuality> = choice
                .iter()
                .zip(&subsets)
                .map(|(&i, s)| s[i].clone())
                .collect();
            let label: Vec<String> = choice.iter().map(usize::to_string).collect();
            let combo_seed = derive_seed(seed, &format!("inputs/{}", label.join(",")));
            optimize_inputs(&models, task, search, combo_seed)
                .map(|solution| AnalysisCandidate { choice, solution })
        })
        .collect::<Result<Vec<_>, _>>()?;
    candidates.sort_by(|a, b| {
        a.solution
            .residual
            .partial_cmp(&b.solution.residual)
            .unwrap_or(Ordering::Equal)
    });
    Ok(AnalysisReport {
        k,
        pools,
        subsets,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{partition, Dataset, PartitionRatios};
    use nalgebra::{DMatrix, DVector};

    fn line_model(weights: Vec<f64>, intercept: f64, columns: Vec<usize>) -> ModelWithQuality {
        ModelWithQuality {
            model: Model::Linear(LinearModel {
                feature_names: columns.iter().map(|c| format!("x{c}")).collect(),
                weights,
                intercept,
            }),
            n_features: columns.len(),
            columns,
            train_mae: 0.0,
            validation_mae: 0.0,
            test_mae: None,
            rank_deficient: false,
            tuning: None,
        }
    }

    fn entry(i: usize, validation_mae: f64, n_features: usize) -> PoolEntry {
        let mut m = line_model(vec![0.0; n_features], i as f64, (0..n_features).collect());
        m.validation_mae = validation_mae;
        PoolEntry {
            recipe: i,
            label: "ols".into(),
            outcome: Ok(m),
        }
    }

    #[test]
    fn inverts_a_line() {
        let task = AnalysisTask {
            target_outputs: vec![6.0],
            input_bounds: vec![(0.0, 10.0)],
            fixed_inputs: vec![],
        };
        let s = optimize_inputs(&[line_model(vec![2.0], 0.0, vec![0])], &task, &InputSearch::default(), 1)
            .unwrap();
        assert!((s.inputs[0] - 3.0).abs() < 1e-3, "{:?}", s.inputs);
        assert!(s.residual < 1e-6);
    }

    #[test]
    fn unreachable_target_hits_nearer_bound() {
        let task = AnalysisTask {
            target_outputs: vec![50.0],
            input_bounds: vec![(0.0, 10.0)],
            fixed_inputs: vec![],
        };
        let s = optimize_inputs(&[line_model(vec![2.0], 0.0, vec![0])], &task, &InputSearch::default(), 2)
            .unwrap();
        assert_eq!(s.inputs[0], 10.0);
        assert_eq!(s.outputs[0], 20.0);
    }

    #[test]
    fn two_by_two_system() {
        // y1 = x0 + 2 x1, y2 = 3 x0 - x1; inverse of (5, 1) is (1, 2).
        let models = [
            line_model(vec![1.0, 2.0], 0.0, vec![0, 1]),
            line_model(vec![3.0, -1.0], 0.0, vec![0, 1]),
        ];
        let task = AnalysisTask {
            target_outputs: vec![5.0, 1.0],
            input_bounds: vec![(-5.0, 5.0), (-5.0, 5.0)],
            fixed_inputs: vec![],
        };
        let s = optimize_inputs(&models, &task, &InputSearch::default(), 3).unwrap();
        assert!(s.residual < 1e-4, "residual {}", s.residual);
        assert!((s.inputs[0] - 1.0).abs() < 0.01 && (s.inputs[1] - 2.0).abs() < 0.02);
    }

    #[test]
    fn fixed_inputs_stay_put() {
        let models = [line_model(vec![1.0, 1.0], 0.0, vec![0, 1])];
        let task = AnalysisTask {
            target_outputs: vec![3.0],
            input_bounds: vec![(0.0, 4.0), (0.0, 4.0)],
            fixed_inputs: vec![(0, 2.5)],
        };
        let s = optimize_inputs(&models, &task, &InputSearch::default(), 4).unwrap();
        assert_eq!(s.inputs[0], 2.5);
        assert!((s.inputs[1] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn task_validation() {
        let model = [line_model(vec![1.0, 1.0], 0.0, vec![0, 1])];
        let bad_bounds = AnalysisTask {
            target_outputs: vec![1.0],
            input_bounds: vec![(1.0, 1.0), (0.0, 1.0)],
            fixed_inputs: vec![],
        };
        assert!(matches!(
            optimize_inputs(&model, &bad_bounds, &InputSearch::default(), 0),
            Err(NetworkError::InfeasibleBounds(_))
        ));
        let too_few = AnalysisTask {
            target_outputs: vec![1.0],
            input_bounds: vec![(0.0, 1.0)],
            fixed_inputs: vec![],
        };
        assert!(matches!(
            optimize_inputs(&model, &too_few, &InputSearch::default(), 0),
            Err(NetworkError::ModelInputMismatch(_))
        ));
    }

    #[test]
    fn subset_ordering_and_ties() {
        let pool = vec![entry(0, 2.0, 3), entry(1, 1.0, 5), entry(2, 1.0, 2), entry(3, 2.0, 3)];
        let all = select_model_subset(&pool, 4, SubsetCriterion::ValidationMae).unwrap();
        let order: Vec<f64> = all
            .iter()
            .map(|m| match &m.model {
                Model::Linear(l) => l.intercept,
                Model::Forest(_) => unreachable!(),
            })
            .collect();
        assert_eq!(order, vec![2.0, 1.0, 0.0, 3.0]);
        assert_eq!(select_model_subset(&pool, 1, SubsetCriterion::ValidationMae).unwrap().len(), 1);
        assert!(matches!(
            select_model_subset(&pool, 5, SubsetCriterion::ValidationMae),
            Err(NetworkError::InvalidK { k: 5, available: 4 })
        ));
        assert!(select_model_subset(&pool, 0, SubsetCriterion::ValidationMae).is_err());
    }

    fn linear_data(seed: u64, w: [f64; 2]) -> PartitionedDataset {
        let x = DMatrix::from_fn(80, 2, |i, j| (((i + 3) * (j + 5) * 31) % 41) as f64 / 4.0 - 5.0);
        let y = DVector::from_fn(80, |i, _| w[0] * x[(i, 0)] + w[1] * x[(i, 1)] + 1.0);
        let data = Dataset::with_default_names(x, y).unwrap();
        partition(&data, PartitionRatios::new(0.5, 0.25, 0.25), seed).unwrap()
    }

    #[test]
    fn pool_is_deterministic_and_keeps_going() {
        let data = linear_data(1, [1.0, 2.0]);
        let recipes = vec![
            Recipe::Ols,
            Recipe::Ols,
            Recipe::RandomForest {
                forest: crate::forest::ForestConfig {
                    n_trees: 0,
                    ..Default::default()
                },
            },
        ];
        let pool = build_model_pool(&data, &recipes, 3).unwrap();
        assert_eq!(pool.len(), 3);
        assert_eq!(pool[0].outcome, pool[1].outcome);
        assert!(pool[2].outcome.is_err());
        assert!(pool[0].outcome.as_ref().unwrap().test_mae.is_some());
    }

    #[test]
    fn analysis_recovers_inverse() {
        let datasets = [linear_data(1, [1.0, 2.0]), linear_data(2, [3.0, -1.0])];
        let recipes = vec![
            Recipe::Ols,
            Recipe::RandomForest {
                forest: crate::forest::ForestConfig {
                    n_trees: 5,
                    ..Default::default()
                },
            },
        ];
        let task = AnalysisTask {
            target_outputs: vec![6.0, 2.0],
            input_bounds: vec![(-5.0, 5.0), (-5.0, 5.0)],
            fixed_inputs: vec![],
        };
        let report =
            optimization_analysis_network(&datasets, &recipes, 2, &task, &InputSearch::default(), 9)
                .unwrap();
        assert_eq!(report.candidates.len(), 4);
        let best = report.best();
        assert_eq!(best.choice, vec![0, 0]);
        assert!((best.solution.inputs[0] - 1.0).abs() < 0.01);
        assert!((best.solution.inputs[1] - 2.0).abs() < 0.01);
        assert!(report
            .candidates
            .windows(2)
            .all(|w| w[0].solution.residual <= w[1].solution.residual));
    }
}

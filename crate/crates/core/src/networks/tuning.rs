use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{PartitionedDataset, RegressionProblem};
use crate::engine::{
    Endpoint, Entry, Message, NetworkBuilder, Node, NodeContext, NodeError, Payload, PayloadKind,
    PortSpec, TerminationRule,
};
use crate::forest::ForestConfig;
use crate::model::{ModelWithQuality, TuningSummary};
use crate::osga::{Osga, OsgaParams, RealSpace};
use crate::rng::derive_seed;

use super::nodes::ModelNode;
use super::{
    columns_key, feature_selection_network, fit_model, FeatureSelectionSettings, ModelSpec,
    NetworkError, NetworkResult,
};

/// Inner evaluations per outer mask.
pub const DEFAULT_INNER_BUDGET: usize = 30;

const TUNER: &str = "tuner";
const EVALUATOR: &str = "evaluator";
const FOREST: &str = "forest";

/// Cartesian grid over `(sample_ratio, feature_ratio, n_trees)`, visited
/// with `sample_ratio` varying slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParameterGrid {
    pub sample_ratio: Vec<f64>,
    pub feature_ratio: Vec<f64>,
    pub n_trees: Vec<usize>,
}

impl Default for ParameterGrid {
    fn default() -> Self {
        Self {
            sample_ratio: vec![0.5, 0.7, 0.9],
            feature_ratio: vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
            n_trees: vec![10, 50],
        }
    }
}

impl ParameterGrid {
    pub fn cells(&self) -> Vec<Vec<f64>> {
        let mut cells = Vec::new();
        for &r in &self.sample_ratio {
            for &m in &self.feature_ratio {
                for &n in &self.n_trees {
                    cells.push(vec![r, m, n as f64]);
                }
            }
        }
        cells
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InnerSearch {
    Grid {
        #[serde(default)]
        grid: ParameterGrid,
    },
    /// Real-coded OSGA; `n_trees` is rounded to the nearest integer.
    RealOsga {
        sample_ratio: (f64, f64),
        feature_ratio: (f64, f64),
        n_trees: (f64, f64),
        #[serde(default = "default_inner_population")]
        population_size: usize,
    },
}

fn default_inner_population() -> usize {
    10
}

impl Default for InnerSearch {
    fn default() -> Self {
        InnerSearch::Grid {
            grid: ParameterGrid::default(),
        }
    }
}

enum TunerState {
    Idle,
    Grid {
        cells: Vec<Vec<f64>>,
        quality: Vec<Option<f64>>,
    },
    Osga {
        osga: Box<Osga<RealSpace>>,
        batch: Vec<Vec<f64>>,
        quality: Vec<Option<f64>>,
    },
}

/// Proposes forest parameter vectors on `parameters`, collects validation
/// errors on `quality` and emits the best vector on `best`.
pub struct ParameterTunerNode {
    search: InnerSearch,
    budget: usize,
    state: TunerState,
    pending: HashMap<u64, usize>,
}

impl ParameterTunerNode {
    pub fn new(search: InnerSearch, budget: usize) -> Self {
        Self {
            search,
            budget,
            state: TunerState::Idle,
            pending: HashMap::new(),
        }
    }

    fn send_batch(&mut self, batch: &[Vec<f64>], ctx: &mut NodeContext) {
        for (i, p) in batch.iter().enumerate() {
            let id = ctx.emit("parameters", Payload::ParameterVector(p.clone()));
            self.pending.insert(id, i);
        }
    }

    fn start(&mut self, ctx: &mut NodeContext) -> Result<(), NodeError> {
        match &self.search {
            InnerSearch::Grid { grid } => {
                let mut cells = grid.cells();
                if cells.is_empty() || self.budget == 0 {
                    return Err("empty parameter grid or zero budget".into());
                }
                cells.truncate(self.budget);
                self.send_batch(&cells, ctx);
                self.state = TunerState::Grid {
                    quality: vec![None; cells.len()],
                    cells,
                };
            }
            InnerSearch::RealOsga {
                sample_ratio,
                feature_ratio,
                n_trees,
                population_size,
            } => {
                let params = OsgaParams {
                    population_size: (*population_size).min(self.budget),
                    max_evaluations: self.budget,
                    mutation_rate: Some(1.0 / 3.0),
                    ..Default::default()
                };
                let space = RealSpace::new(vec![*sample_ratio, *feature_ratio, *n_trees]);
                let mut osga = Box::new(Osga::new(space, params, ctx.rng().clone())?);
                let batch = osga.ask().ok_or("inner search produced no candidates")?;
                self.send_batch(&batch, ctx);
                self.state = TunerState::Osga {
                    quality: vec![None; batch.len()],
                    batch,
                    osga,
                };
            }
        }
        Ok(())
    }

    fn record(&mut self, id: u64, value: f64, ctx: &mut NodeContext) -> Result<(), NodeError> {
        let i = self
            .pending
            .remove(&id)
            .ok_or_else(|| format!("no pending parameter vector {id}"))?;
        match &mut self.state {
            TunerState::Idle => return Err("tuning not started".into()),
            TunerState::Grid { quality, .. } | TunerState::Osga { quality, .. } => {
                quality[i] = Some(value)
            }
        }
        if !self.pending.is_empty() {
            return Ok(());
        }
        match &mut self.state {
            TunerState::Idle => unreachable!("checked above"),
            TunerState::Grid { cells, quality } => {
                let scores: Vec<f64> = quality.iter().flatten().copied().collect();
                let best = (0..scores.len())
                    .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
                    .expect("grid is non-empty");
                ctx.emit("best", Payload::ParameterVector(cells[best].clone()));
            }
            TunerState::Osga {
                osga,
                batch,
                quality,
            } => {
                let scores: Vec<f64> = quality.drain(..).flatten().collect();
                osga.tell(&scores)?;
                match osga.ask() {
                    Some(next) => {
                        *quality = vec![None; next.len()];
                        *batch = next.clone();
                        self.send_batch(&next, ctx);
                    }
                    None => {
                        let best = osga.result().best.genome;
                        ctx.emit("best", Payload::ParameterVector(best));
                    }
                }
            }
        }
        Ok(())
    }
}

impl Node for ParameterTunerNode {
    fn ports(&self) -> Vec<PortSpec> {
        vec![
            PortSpec::input("start", PayloadKind::FeatureCount),
            PortSpec::output("parameters", PayloadKind::ParameterVector),
            PortSpec::input("quality", PayloadKind::ScalarQuality),
            PortSpec::output("best", PayloadKind::ParameterVector),
        ]
    }

    fn handle(&mut self, port: &str, message: &Message, ctx: &mut NodeContext) -> Result<(), NodeError> {
        match (port, &message.payload) {
            ("start", Payload::FeatureCount(_)) => self.start(ctx),
            ("quality", Payload::ScalarQuality(q)) => {
                let id = message.in_reply_to.ok_or("reply without correlation id")?;
                self.record(id, *q, ctx)
            }
            _ => Err(format!("unexpected {} on `{port}`", message.payload.kind()).into()),
        }
    }
}

/// Attaches proposed parameters to a fixed regression problem and reports
/// the validation MAE of the resulting model.
pub struct TuningEvaluatorNode {
    problem: RegressionProblem,
    pending: HashMap<u64, u64>,
}

impl TuningEvaluatorNode {
    pub fn new(problem: RegressionProblem) -> Self {
        Self {
            problem,
            pending: HashMap::new(),
        }
    }
}

impl Node for TuningEvaluatorNode {
    fn ports(&self) -> Vec<PortSpec> {
        vec![
            PortSpec::input("parameters", PayloadKind::ParameterVector),
            PortSpec::output("problem", PayloadKind::RegressionProblem),
            PortSpec::input("model", PayloadKind::ModelWithQuality),
            PortSpec::output("quality", PayloadKind::ScalarQuality),
        ]
    }

    fn handle(&mut self, port: &str, message: &Message, ctx: &mut NodeContext) -> Result<(), NodeError> {
        match (port, &message.payload) {
            ("parameters", Payload::ParameterVector(p)) => {
                let problem = RegressionProblem {
                    parameters: Some(p.clone()),
                    ..self.problem.clone()
                };
                let id = ctx.emit("problem", Payload::RegressionProblem(Box::new(problem)));
                self.pending.insert(id, message.correlation_id);
                Ok(())
            }
            ("model", Payload::ModelWithQuality(m)) => {
                let id = message.in_reply_to.ok_or("reply without correlation id")?;
                let origin = self
                    .pending
                    .remove(&id)
                    .ok_or_else(|| format!("no pending problem {id}"))?;
                ctx.reply("quality", Payload::ScalarQuality(m.validation_mae), origin);
                Ok(())
            }
            _ => Err(format!("unexpected {} on `{port}`", message.payload.kind()).into()),
        }
    }
}

/// Runs the inner tuning network for one problem and returns the best
/// forest, refitted with the chosen parameters.
pub fn tune_forest(
    problem: &RegressionProblem,
    base: &ForestConfig,
    search: &InnerSearch,
    budget: usize,
    seed: u64,
) -> Result<ModelWithQuality, NetworkError> {
    let inner_seed = derive_seed(seed, &format!("tuner/{}", columns_key(&problem.columns)));
    let forest = ModelSpec::RandomForest {
        forest: base.clone(),
    };
    let base_problem = RegressionProblem {
        parameters: None,
        ..problem.clone()
    };
    let ep = Endpoint::new;
    let mut network = NetworkBuilder::new(inner_seed)
        .node(TUNER, Box::new(ParameterTunerNode::new(search.clone(), budget)))
        .node(EVALUATOR, Box::new(TuningEvaluatorNode::new(base_problem.clone())))
        .node(FOREST, Box::new(ModelNode::new(forest.clone(), seed)))
        .connect(ep(TUNER, "parameters"), ep(EVALUATOR, "parameters"))
        .connect(ep(EVALUATOR, "problem"), ep(FOREST, "problem"))
        .connect(ep(FOREST, "model"), ep(EVALUATOR, "model"))
        .connect(ep(EVALUATOR, "quality"), ep(TUNER, "quality"))
        .build()?;
    let run = network.run(
        vec![Entry::new(ep(TUNER, "start"), Payload::FeatureCount(3))],
        TerminationRule::FinalPayload(ep(TUNER, "best")),
        1,
    )?;
    let Some(Payload::ParameterVector(best)) = run.final_payload else {
        return Err(NetworkError::MissingResult("tuner emitted no parameters".into()));
    };
    let evaluations = run.handled[FOREST];
    let budget_exhausted = match search {
        InnerSearch::Grid { grid } => grid.cells().len() > budget,
        InnerSearch::RealOsga { .. } => evaluations >= budget,
    };
    let chosen = RegressionProblem {
        parameters: Some(best),
        ..base_problem
    };
    let mut model = fit_model(&forest, &chosen, seed)?;
    let config = super::forest_with_parameters(base, chosen.parameters.as_deref())?;
    model.tuning = Some(TuningSummary {
        parameters: vec![config.sample_ratio, config.feature_ratio, config.n_trees as f64],
        evaluations,
        budget_exhausted,
    });
    Ok(model)
}

/// Feature selection whose model node is a complete inner tuning network.
pub fn nested_tuning_network(
    data: &PartitionedDataset,
    outer: &FeatureSelectionSettings,
    base: &ForestConfig,
    search: &InnerSearch,
    budget: usize,
    seed: u64,
    workers: usize,
) -> Result<NetworkResult, NetworkError> {
    let settings = FeatureSelectionSettings {
        model: ModelSpec::TunedForest {
            base: base.clone(),
            search: search.clone(),
            budget,
        },
        ..outer.clone()
    };
    feature_selection_network(data, &settings, seed, workers)
}

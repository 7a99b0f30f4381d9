use std::collections::HashMap;

use crate::data::{FeatureMask, PartitionedDataset};
use crate::engine::{Message, Node, NodeContext, NodeError, Payload, PayloadKind, PortSpec};
use crate::osga::{BinarySpace, Osga, OsgaParams};

use super::{fit_model, fitness, ModelSpec};

fn unexpected(port: &str, message: &Message) -> NodeError {
    format!(
        "unexpected {} payload on port `{port}`",
        message.payload.kind()
    )
    .into()
}

fn reply_target(message: &Message) -> Result<u64, NodeError> {
    message
        .in_reply_to
        .ok_or_else(|| "reply without correlation id".into())
}

/// Runs an OSGA over feature masks. A `start` message carrying the feature
/// count launches the search; each generation's batch is sent out on
/// `evaluation` and the matching `quality` replies are fed back. The final
/// [`RunResult`](crate::osga::RunResult) leaves on `result`.
pub struct FeatureSelectorNode {
    params: OsgaParams,
    space: BinarySpace,
    osga: Option<Osga<BinarySpace>>,
    pending: HashMap<u64, usize>,
    fitness: Vec<Option<f64>>,
}

impl FeatureSelectorNode {
    /// `space.len` is replaced by the feature count received on `start`.
    pub fn new(params: OsgaParams, space: BinarySpace) -> Self {
        Self {
            params,
            space,
            osga: None,
            pending: HashMap::new(),
            fitness: Vec::new(),
        }
    }

    fn dispatch(&mut self, ctx: &mut NodeContext) -> Result<(), NodeError> {
        let osga = self.osga.as_mut().ok_or("search not started")?;
        match osga.ask() {
            Some(batch) => {
                self.fitness = vec![None; batch.len()];
                for (i, genome) in batch.into_iter().enumerate() {
                    let id = ctx.emit("evaluation", Payload::FeatureMask(FeatureMask::new(genome)));
                    self.pending.insert(id, i);
                }
            }
            None => {
                let result = osga.result().map_genome(FeatureMask::new);
                ctx.emit("result", Payload::SearchResult(Box::new(result)));
            }
        }
        Ok(())
    }
}

impl Node for FeatureSelectorNode {
    fn ports(&self) -> Vec<PortSpec> {
        vec![
            PortSpec::input("start", PayloadKind::FeatureCount),
            PortSpec::output("evaluation", PayloadKind::FeatureMask),
            PortSpec::input("quality", PayloadKind::ScalarQuality),
            PortSpec::output("result", PayloadKind::SearchResult),
        ]
    }

    fn handle(&mut self, port: &str, message: &Message, ctx: &mut NodeContext) -> Result<(), NodeError> {
        match (port, &message.payload) {
            ("start", Payload::FeatureCount(n)) => {
                if self.osga.is_some() {
                    return Err("search already started".into());
                }
                let space = BinarySpace {
                    len: *n,
                    ..self.space.clone()
                };
                self.osga = Some(Osga::new(space, self.params.clone(), ctx.rng().clone())?);
                self.dispatch(ctx)
            }
            ("quality", Payload::ScalarQuality(f)) => {
                let id = reply_target(message)?;
                let i = self
                    .pending
                    .remove(&id)
                    .ok_or_else(|| format!("no pending evaluation {id}"))?;
                self.fitness[i] = Some(*f);
                if self.pending.is_empty() {
                    let fitness: Vec<f64> = self.fitness.drain(..).flatten().collect();
                    self.osga
                        .as_mut()
                        .ok_or("search not started")?
                        .tell(&fitness)?;
                    self.dispatch(ctx)?;
                }
                Ok(())
            }
            _ => Err(unexpected(port, message)),
        }
    }
}

/// Translates masks into projected regression problems and turns the
/// returned models into penalized fitness values.
pub struct FeatureSelectionOrchestrator<'a> {
    data: &'a PartitionedDataset,
    penalty: f64,
    /// Problem id to mask id.
    pending: HashMap<u64, u64>,
}

impl<'a> FeatureSelectionOrchestrator<'a> {
    pub fn new(data: &'a PartitionedDataset, penalty: f64) -> Self {
        Self {
            data,
            penalty,
            pending: HashMap::new(),
        }
    }
}

impl Node for FeatureSelectionOrchestrator<'_> {
    fn ports(&self) -> Vec<PortSpec> {
        vec![
            PortSpec::input("features", PayloadKind::FeatureMask),
            PortSpec::output("problem", PayloadKind::RegressionProblem),
            PortSpec::input("model", PayloadKind::ModelWithQuality),
            PortSpec::output("quality", PayloadKind::ScalarQuality),
        ]
    }

    fn handle(&mut self, port: &str, message: &Message, ctx: &mut NodeContext) -> Result<(), NodeError> {
        match (port, &message.payload) {
            ("features", Payload::FeatureMask(mask)) => {
                let problem = self.data.problem(mask)?;
                let id = ctx.emit("problem", Payload::RegressionProblem(Box::new(problem)));
                self.pending.insert(id, message.correlation_id);
                Ok(())
            }
            ("model", Payload::ModelWithQuality(model)) => {
                let id = reply_target(message)?;
                let mask_id = self
                    .pending
                    .remove(&id)
                    .ok_or_else(|| format!("no pending problem {id}"))?;
                let f = fitness(model, self.penalty);
                ctx.reply("quality", Payload::ScalarQuality(f), mask_id);
                Ok(())
            }
            _ => Err(unexpected(port, message)),
        }
    }
}

/// Fits and scores one model per incoming problem.
pub struct ModelNode {
    spec: ModelSpec,
    seed: u64,
}

impl ModelNode {
    pub fn new(spec: ModelSpec, seed: u64) -> Self {
        Self { spec, seed }
    }
}

impl Node for ModelNode {
    fn ports(&self) -> Vec<PortSpec> {
        vec![
            PortSpec::input("problem", PayloadKind::RegressionProblem),
            PortSpec::output("model", PayloadKind::ModelWithQuality),
        ]
    }

    fn handle(&mut self, port: &str, message: &Message, ctx: &mut NodeContext) -> Result<(), NodeError> {
        let Payload::RegressionProblem(problem) = &message.payload else {
            return Err(unexpected(port, message));
        };
        let model = fit_model(&self.spec, problem, self.seed)?;
        ctx.reply(
            "model",
            Payload::ModelWithQuality(Box::new(model)),
            message.correlation_id,
        );
        Ok(())
    }
}

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMask, PartitionedDataset};
use crate::engine::{Endpoint, Entry, NetworkBuilder, Payload, TerminationRule};
use crate::osga::{BinaryCrossover, BinarySpace, Osga, OsgaParams};
use crate::rng::{derive_seed, named_stream};

use super::nodes::{FeatureSelectionOrchestrator, FeatureSelectorNode, ModelNode};
use super::{finalize, fit_model, fitness, FitnessConfig, ModelSpec, NetworkError, NetworkResult};

pub const SELECTOR_NODE: &str = "selector";
pub const ORCHESTRATOR_NODE: &str = "orchestrator";
pub const MODEL_NODE: &str = "model";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSelectionSettings {
    pub osga: OsgaParams,
    /// Probability that a bit is set in the initial masks.
    pub init_density: f64,
    pub crossover: BinaryCrossover,
    pub fitness: FitnessConfig,
    pub model: ModelSpec,
}

impl Default for FeatureSelectionSettings {
    fn default() -> Self {
        let space = BinarySpace::new(0);
        Self {
            osga: OsgaParams::default(),
            init_density: space.init_density,
            crossover: space.crossover,
            fitness: FitnessConfig::default(),
            model: ModelSpec::Ols,
        }
    }
}

impl FeatureSelectionSettings {
    fn space(&self, len: usize) -> BinarySpace {
        BinarySpace {
            len,
            init_density: self.init_density,
            crossover: self.crossover,
        }
    }
}

/// Wires selector, orchestrator and model node and runs the search until
/// the selector reports its result. The test partition is read once, after
/// the search, to score the refitted winner.
pub fn feature_selection_network(
    data: &PartitionedDataset,
    settings: &FeatureSelectionSettings,
    seed: u64,
    workers: usize,
) -> Result<NetworkResult, NetworkError> {
    let start = Instant::now();
    let penalty = settings.fitness.penalty(data)?;
    let model_seed = derive_seed(seed, MODEL_NODE);
    let ep = Endpoint::new;
    let mut network = NetworkBuilder::new(seed)
        .node(
            SELECTOR_NODE,
            Box::new(FeatureSelectorNode::new(settings.osga.clone(), settings.space(0))),
        )
        .node(
            ORCHESTRATOR_NODE,
            Box::new(FeatureSelectionOrchestrator::new(data, penalty)),
        )
        .node(
            MODEL_NODE,
            Box::new(ModelNode::new(settings.model.clone(), model_seed)),
        )
        .connect(ep(SELECTOR_NODE, "evaluation"), ep(ORCHESTRATOR_NODE, "features"))
        .connect(ep(ORCHESTRATOR_NODE, "problem"), ep(MODEL_NODE, "problem"))
        .connect(ep(MODEL_NODE, "model"), ep(ORCHESTRATOR_NODE, "model"))
        .connect(ep(ORCHESTRATOR_NODE, "quality"), ep(SELECTOR_NODE, "quality"))
        .build()?;
    let entry = Entry::new(
        ep(SELECTOR_NODE, "start"),
        Payload::FeatureCount(data.n_features()),
    );
    let run = network.run(
        vec![entry],
        TerminationRule::FinalPayload(ep(SELECTOR_NODE, "result")),
        workers,
    )?;
    let Some(Payload::SearchResult(search)) = run.final_payload else {
        return Err(NetworkError::MissingResult("selector emitted no result".into()));
    };
    finalize(data, &settings.model, model_seed, *search, penalty, start.elapsed())
}

/// The same search as [`feature_selection_network`] written as a plain
/// ask/evaluate/tell loop, with identical seeds.
pub fn feature_selection_direct(
    data: &PartitionedDataset,
    settings: &FeatureSelectionSettings,
    seed: u64,
) -> Result<NetworkResult, NetworkError> {
    let start = Instant::now();
    let penalty = settings.fitness.penalty(data)?;
    let model_seed = derive_seed(seed, MODEL_NODE);
    let mut osga = Osga::new(
        settings.space(data.n_features()),
        settings.osga.clone(),
        named_stream(seed, SELECTOR_NODE),
    )?;
    while let Some(batch) = osga.ask() {
        let mut scores = Vec::with_capacity(batch.len());
        for genome in batch {
            let problem = data.problem(&FeatureMask::new(genome))?;
            let model = fit_model(&settings.model, &problem, model_seed)?;
            scores.push(fitness(&model, penalty));
        }
        osga.tell(&scores)?;
    }
    let search = osga.result().map_genome(FeatureMask::new);
    finalize(data, &settings.model, model_seed, search, penalty, start.elapsed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_benchmark, partition, BenchmarkConfig, Dataset, PartitionRatios};
    use crate::forest::ForestConfig;
    use nalgebra::DMatrix;

    fn toy(seed: u64) -> PartitionedDataset {
        let x = DMatrix::from_fn(60, 3, |i, j| (((i + 1) * (j + 3) * 37) % 23) as f64 - 11.0);
        let y = x.column(0).into_owned();
        let data = Dataset::with_default_names(x, y).unwrap();
        partition(&data, PartitionRatios::new(0.5, 0.25, 0.25), seed).unwrap()
    }

    fn small_settings() -> FeatureSelectionSettings {
        FeatureSelectionSettings {
            osga: OsgaParams {
                population_size: 10,
                max_evaluations: 400,
                max_selection_pressure: 20.0,
                ..Default::default()
            },
            init_density: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_single_feature_is_found() {
        let data = toy(1);
        let r = feature_selection_network(&data, &small_settings(), 5, 1).unwrap();
        assert_eq!(r.best_mask.to_string(), "100");
        assert!(r.best_model.validation_mae < 1e-9);
        assert!(r.best_model.test_mae.unwrap() < 1e-9);
        assert_eq!(data.test_reads(), 1);
    }

    #[test]
    fn network_matches_direct_loop() {
        let (data, _) = generate_benchmark(
            &BenchmarkConfig {
                n_observations: 200,
                n_features: 20,
                n_relevant: 4,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let data = partition(&data, PartitionRatios::default(), 3).unwrap();
        let settings = FeatureSelectionSettings {
            osga: OsgaParams {
                population_size: 20,
                max_evaluations: 1500,
                ..Default::default()
            },
            ..Default::default()
        };
        for seed in 0..3 {
            let net = feature_selection_network(&data, &settings, seed, 1).unwrap();
            let direct = feature_selection_direct(&data, &settings, seed).unwrap();
            let parallel = feature_selection_network(&data, &settings, seed, 4).unwrap();
            assert!(net.same_outcome(&direct), "seed {seed}");
            assert!(net.same_outcome(&parallel), "seed {seed}");
        }
    }

    #[test]
    fn forest_node_swaps_in() {
        let data = toy(2);
        let settings = FeatureSelectionSettings {
            model: ModelSpec::RandomForest {
                forest: ForestConfig {
                    n_trees: 5,
                    ..Default::default()
                },
            },
            ..small_settings()
        };
        let net = feature_selection_network(&data, &settings, 1, 2).unwrap();
        let direct = feature_selection_direct(&data, &settings, 1).unwrap();
        assert!(net.same_outcome(&direct));
        assert!(net.best_mask.bits()[0]);
    }

    #[test]
    fn reported_fitness_decomposes() {
        let data = toy(4);
        let settings = FeatureSelectionSettings {
            fitness: FitnessConfig {
                penalty_per_feature: Some(0.25),
            },
            ..small_settings()
        };
        let r = feature_selection_network(&data, &settings, 9, 1).unwrap();
        let expected = r.best_model.validation_mae + 0.25 * r.best_mask.count_selected() as f64;
        assert_eq!(r.fitness, expected);
        assert_eq!(r.search.best.fitness, expected);
    }

    #[test]
    fn huge_penalty_selects_empty_mask() {
        let data = toy(4);
        let settings = FeatureSelectionSettings {
            fitness: FitnessConfig {
                penalty_per_feature: Some(1e6),
            },
            ..small_settings()
        };
        let r = feature_selection_network(&data, &settings, 2, 1).unwrap();
        assert_eq!(r.best_mask.count_selected(), 0);
    }
}

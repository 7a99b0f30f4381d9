use nalgebra::{DMatrix, DVector};
use optnet::data::{
    generate_benchmark, partition, BenchmarkConfig, Dataset, FeatureMask, PartitionRatios,
    PartitionedDataset,
};
use optnet::forest::ForestConfig;
use optnet::networks::{
    build_model_pool, feature_selection_network, fit_model, nested_tuning_network,
    select_model_subset, FeatureSelectionSettings, InnerSearch, ModelSpec, Recipe,
    SubsetCriterion,
};
use optnet::osga::OsgaParams;
use optnet::rng::named_stream;
use rand::Rng;

fn small_benchmark(seed: u64) -> PartitionedDataset {
    let cfg = BenchmarkConfig {
        n_observations: 400,
        n_features: 20,
        n_relevant: 4,
        ..Default::default()
    };
    let (d, _) = generate_benchmark(&cfg, seed).unwrap();
    partition(&d, PartitionRatios::new(0.5, 0.25, 0.25), seed).unwrap()
}

fn quick(max_evaluations: usize) -> FeatureSelectionSettings {
    FeatureSelectionSettings {
        osga: OsgaParams {
            population_size: 12,
            max_evaluations,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// Two informative inputs with a step response plus three noise columns.
fn step_data(seed: u64) -> PartitionedDataset {
    let mut rng = named_stream(seed, "step");
    let n = 240;
    let x = DMatrix::from_fn(n, 5, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(n, |i, _| {
        let step = if x[(i, 0)] > 0.0 { 4.0 } else { -4.0 };
        step + 2.0 * (x[(i, 1)] > 0.3) as u8 as f64 + rng.random_range(-0.2..0.2)
    });
    let d = Dataset::with_default_names(x, y).unwrap();
    partition(&d, PartitionRatios::new(0.5, 0.25, 0.25), seed).unwrap()
}

#[test]
fn nested_forest_network_beats_linear_on_a_step() {
    let data = step_data(2);
    let outer = quick(60);
    let nested = nested_tuning_network(
        &data,
        &outer,
        &ForestConfig {
            n_trees: 10,
            ..Default::default()
        },
        &InnerSearch::default(),
        6,
        9,
        1,
    )
    .unwrap();
    let linear = feature_selection_network(&step_data(2), &outer, 9, 1).unwrap();
    let nested_mae = nested.best_model.test_mae.unwrap();
    let linear_mae = linear.best_model.test_mae.unwrap();
    assert!(nested_mae <= linear_mae, "nested {nested_mae} vs linear {linear_mae}");
    let tuning = nested.best_model.tuning.as_ref().unwrap();
    assert!(tuning.evaluations <= 6);
}

#[test]
fn selected_model_validates_no_worse_than_full_ols() {
    let data = small_benchmark(5);
    let pool = build_model_pool(
        &data,
        &[
            Recipe::Ols,
            Recipe::FeatureSelection {
                settings: quick(600),
            },
        ],
        5,
    )
    .unwrap();
    assert_eq!(pool.len(), 2);
    let full = pool[0].outcome.as_ref().unwrap();
    let selected = pool[1].outcome.as_ref().unwrap();
    assert!(selected.validation_mae <= full.validation_mae);
    let best = select_model_subset(&pool, 1, SubsetCriterion::ValidationMae).unwrap();
    assert_eq!(best[0].columns, selected.columns);
}

#[test]
fn forest_model_spec_round_trips_through_the_network() {
    let data = small_benchmark(8);
    let settings = FeatureSelectionSettings {
        model: ModelSpec::RandomForest {
            forest: ForestConfig {
                n_trees: 5,
                ..Default::default()
            },
        },
        ..quick(48)
    };
    let a = feature_selection_network(&data, &settings, 3, 1).unwrap();
    let b = feature_selection_network(&small_benchmark(8), &settings, 3, 2).unwrap();
    assert!(a.same_outcome(&b));
    let refit = fit_model(
        &settings.model,
        &data.problem(&a.best_mask).unwrap(),
        optnet::rng::derive_seed(3, "model"),
    )
    .unwrap();
    assert_eq!(refit.validation_mae, a.best_model.validation_mae);
    assert_ne!(a.best_mask, FeatureMask::none(20));
}

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::seq::index;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};
use crate::rng;

/// Shape of the synthetic linear benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub n_observations: usize,
    pub n_features: usize,
    pub n_relevant: usize,
    pub weight_low: f64,
    pub weight_high: f64,
    /// Share of `Var(y)` explained by the noise term, in `[0, 1)`.
    pub noise_variance_fraction: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_observations: 1000,
            n_features: 100,
            n_relevant: 15,
            weight_low: 0.0,
            weight_high: 10.0,
            noise_variance_fraction: 0.2,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |m: &str| Err(DataError::InvalidConfig(m.to_string()));
        if self.n_observations < 2 {
            return fail("n_observations must be at least 2");
        }
        if self.n_features == 0 {
            return fail("n_features must be positive");
        }
        if self.n_relevant > self.n_features {
            return fail("n_relevant exceeds n_features");
        }
        if !(self.weight_low.is_finite() && self.weight_high.is_finite())
            || self.weight_low > self.weight_high
        {
            return fail("weight range must be finite with weight_low <= weight_high");
        }
        if !(0.0..1.0).contains(&self.noise_variance_fraction) {
            return fail("noise_variance_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Generating parameters of a benchmark draw, for scoring recovered features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Sorted ascending.
    pub true_indices: Vec<usize>,
    pub true_weights: Vec<f64>,
    pub noise_sigma: f64,
}

impl GroundTruth {
    /// How many of the true features a selection contains.
    pub fn count_correct(&self, selected: &[usize]) -> usize {
        selected
            .iter()
            .filter(|i| self.true_indices.binary_search(i).is_ok())
            .count()
    }

    /// Noise-free target `Σ w_i x_i` for each row of `dataset`.
    pub fn signal(&self, dataset: &Dataset) -> DVector<f64> {
        let x = dataset.features();
        let mut signal = DVector::zeros(dataset.n_rows());
        for (&j, &w) in self.true_indices.iter().zip(&self.true_weights) {
            signal.axpy(w, &x.column(j), 1.0);
        }
        signal
    }
}

fn sample_variance(v: &DVector<f64>) -> f64 {
    let n = v.len() as f64;
    let mean = v.mean();
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Draws a dataset `y = Σ w_i x_i + ε` with iid standard-normal features.
///
/// The noise standard deviation is calibrated on the realized noise-free
/// target so that `Var(ε) / Var(y) = noise_variance_fraction` in expectation.
pub fn generate_benchmark(
    config: &BenchmarkConfig,
    seed: u64,
) -> Result<(Dataset, GroundTruth), DataError> {
    config.validate()?;
    let mut rng = rng::named_stream(seed, "benchmark");
    let (n, d) = (config.n_observations, config.n_features);

    // Row-major draw keeps the stream layout independent of matrix storage.
    let mut features = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            features[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }

    let mut true_indices = index::sample(&mut rng, d, config.n_relevant).into_vec();
    true_indices.sort_unstable();
    let weight_dist = Uniform::new_inclusive(config.weight_low, config.weight_high)
        .map_err(|e| DataError::InvalidConfig(e.to_string()))?;
    let true_weights: Vec<f64> = true_indices
        .iter()
        .map(|_| weight_dist.sample(&mut rng))
        .collect();

    let mut signal = DVector::zeros(n);
    for (&j, &w) in true_indices.iter().zip(&true_weights) {
        signal.axpy(w, &features.column(j), 1.0);
    }

    let f = config.noise_variance_fraction;
    let noise_sigma = (f / (1.0 - f) * sample_variance(&signal)).sqrt();
    let target = if noise_sigma > 0.0 {
        let noise = Normal::new(0.0, noise_sigma)
            .map_err(|e| DataError::InvalidConfig(e.to_string()))?;
        signal.map(|s| s + noise.sample(&mut rng))
    } else {
        signal
    };

    let dataset = Dataset::with_default_names(features, target)?;
    Ok((
        dataset,
        GroundTruth {
            true_indices,
            true_weights,
            noise_sigma,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dimensions() {
        let (d, gt) = generate_benchmark(&BenchmarkConfig::default(), 42).unwrap();
        assert_eq!((d.n_rows(), d.n_features()), (1000, 100));
        assert_eq!(gt.true_indices.len(), 15);
        assert_eq!(gt.true_weights.len(), 15);
        assert!(gt.true_weights.iter().all(|w| (0.0..=10.0).contains(w)));
        assert!(gt.true_indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn noiseless_target_is_exact_signal() {
        let cfg = BenchmarkConfig {
            n_observations: 50,
            n_features: 8,
            n_relevant: 3,
            noise_variance_fraction: 0.0,
            ..Default::default()
        };
        let (d, gt) = generate_benchmark(&cfg, 1).unwrap();
        assert_eq!(gt.noise_sigma, 0.0);
        assert_eq!(&gt.signal(&d), d.target());
    }

    #[test]
    fn forced_single_weight() {
        let cfg = BenchmarkConfig {
            n_observations: 20,
            n_features: 1,
            n_relevant: 1,
            weight_low: 2.0,
            weight_high: 2.0,
            noise_variance_fraction: 0.2,
        };
        let (d, gt) = generate_benchmark(&cfg, 3).unwrap();
        assert_eq!(gt.true_indices, vec![0]);
        assert_eq!(gt.true_weights, vec![2.0]);
        let eps = d.target() - d.features().column(0) * 2.0;
        assert!(eps.iter().any(|e| *e != 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = BenchmarkConfig {
            n_observations: 30,
            n_features: 5,
            n_relevant: 2,
            ..Default::default()
        };
        let a = generate_benchmark(&cfg, 9).unwrap();
        let b = generate_benchmark(&cfg, 9).unwrap();
        let c = generate_benchmark(&cfg, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn noise_share_of_variance() {
        for seed in 0..20 {
            let (d, gt) = generate_benchmark(&BenchmarkConfig::default(), seed).unwrap();
            let eps = d.target() - gt.signal(&d);
            let share = sample_variance(&eps) / sample_variance(d.target());
            assert!((0.17..=0.23).contains(&share), "seed {seed}: {share}");
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            BenchmarkConfig { n_relevant: 101, ..Default::default() },
            BenchmarkConfig { weight_low: 3.0, weight_high: 1.0, ..Default::default() },
            BenchmarkConfig { noise_variance_fraction: 1.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(
                generate_benchmark(&cfg, 0),
                Err(DataError::InvalidConfig(_))
            ));
        }
    }
}

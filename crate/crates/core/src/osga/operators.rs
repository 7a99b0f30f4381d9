//! Variation operators for binary and real-valued genomes.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::OsgaError;
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinaryCrossover {
    SinglePoint,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealCrossover {
    /// Blend `α a + (1-α) b` with one `α ~ U(0,1)` per child.
    Arithmetic,
    /// Simulated binary crossover with distribution index `eta`.
    SimulatedBinary { eta: f64 },
}

pub(crate) fn binary_crossover_unchecked(
    a: &[bool],
    b: &[bool],
    kind: BinaryCrossover,
    rng: &mut Stream,
) -> Vec<bool> {
    match kind {
        BinaryCrossover::Uniform => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| if rng.random_bool(0.5) { x } else { y })
            .collect(),
        BinaryCrossover::SinglePoint => {
            if a.len() < 2 {
                return a.to_vec();
            }
            let cut = rng.random_range(1..a.len());
            a[..cut].iter().chain(&b[cut..]).copied().collect()
        }
    }
}

pub fn binary_crossover(
    a: &[bool],
    b: &[bool],
    kind: BinaryCrossover,
    rng: &mut Stream,
) -> Result<Vec<bool>, OsgaError> {
    if a.len() != b.len() {
        return Err(OsgaError::LengthMismatch(a.len(), b.len()));
    }
    Ok(binary_crossover_unchecked(a, b, kind, rng))
}

/// Flips each bit independently with probability `rate`.
pub fn bitflip_mutation(genome: &mut [bool], rate: f64, rng: &mut Stream) {
    let rate = rate.clamp(0.0, 1.0);
    for bit in genome.iter_mut() {
        if rng.random_bool(rate) {
            *bit = !*bit;
        }
    }
}

fn check_bounds(genome: &[f64], bounds: &[(f64, f64)]) -> Result<(), OsgaError> {
    if genome.len() != bounds.len() {
        return Err(OsgaError::LengthMismatch(genome.len(), bounds.len()));
    }
    for (i, (&g, &(lo, hi))) in genome.iter().zip(bounds).enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && g >= lo && g <= hi) {
            return Err(OsgaError::OutOfBounds {
                gene: i,
                value: g,
                lo,
                hi,
            });
        }
    }
    Ok(())
}

pub(crate) fn real_crossover_unchecked(
    a: &[f64],
    b: &[f64],
    bounds: &[(f64, f64)],
    kind: RealCrossover,
    rng: &mut Stream,
) -> Vec<f64> {
    match kind {
        RealCrossover::Arithmetic => {
            let alpha: f64 = rng.random();
            a.iter()
                .zip(b)
                .zip(bounds)
                .map(|((x, y), &(lo, hi))| (alpha * x + (1.0 - alpha) * y).clamp(lo, hi))
                .collect()
        }
        RealCrossover::SimulatedBinary { eta } => a
            .iter()
            .zip(b)
            .zip(bounds)
            .map(|((&x, &y), &(lo, hi))| {
                let u: f64 = rng.random();
                let beta = if u <= 0.5 {
                    (2.0 * u).powf(1.0 / (eta + 1.0))
                } else {
                    (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
                };
                let child = if rng.random_bool(0.5) {
                    0.5 * ((1.0 + beta) * x + (1.0 - beta) * y)
                } else {
                    0.5 * ((1.0 - beta) * x + (1.0 + beta) * y)
                };
                child.clamp(lo, hi)
            })
            .collect(),
    }
}

pub fn real_crossover(
    a: &[f64],
    b: &[f64],
    bounds: &[(f64, f64)],
    kind: RealCrossover,
    rng: &mut Stream,
) -> Result<Vec<f64>, OsgaError> {
    check_bounds(a, bounds)?;
    check_bounds(b, bounds)?;
    Ok(real_crossover_unchecked(a, b, bounds, kind, rng))
}

pub(crate) fn gaussian_mutation_unchecked(
    genome: &mut [f64],
    bounds: &[(f64, f64)],
    sigma_fraction: f64,
    rate: f64,
    rng: &mut Stream,
) {
    let rate = rate.clamp(0.0, 1.0);
    for (g, &(lo, hi)) in genome.iter_mut().zip(bounds) {
        if !rng.random_bool(rate) {
            continue;
        }
        let sigma = sigma_fraction * (hi - lo);
        if sigma > 0.0 {
            let noise = Normal::new(0.0, sigma).expect("positive sigma").sample(rng);
            *g = (*g + noise).clamp(lo, hi);
        }
    }
}

/// Adds `N(0, (sigma_fraction·(hi-lo))²)` to each gene with probability
/// `rate`, clamping to the bounds.
pub fn gaussian_mutation(
    genome: &mut [f64],
    bounds: &[(f64, f64)],
    sigma_fraction: f64,
    rate: f64,
    rng: &mut Stream,
) -> Result<(), OsgaError> {
    check_bounds(genome, bounds)?;
    if !(sigma_fraction.is_finite() && sigma_fraction >= 0.0) {
        return Err(OsgaError::InvalidParams(format!(
            "sigma_fraction {sigma_fraction}"
        )));
    }
    gaussian_mutation_unchecked(genome, bounds, sigma_fraction, rate, rng);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    #[test]
    fn identical_parents_reproduce() {
        let mut rng = substream(1, 0);
        let a = vec![true, false, true, true, false];
        for kind in [BinaryCrossover::Uniform, BinaryCrossover::SinglePoint] {
            assert_eq!(binary_crossover(&a, &a, kind, &mut rng).unwrap(), a);
        }
        let x = vec![0.3, -1.2];
        let bounds = vec![(-2.0, 2.0); 2];
        let child = real_crossover(&x, &x, &bounds, RealCrossover::Arithmetic, &mut rng).unwrap();
        for (c, v) in child.iter().zip(&x) {
            assert!((c - v).abs() < 1e-15);
        }
    }

    #[test]
    fn mutation_extremes() {
        let mut rng = substream(2, 0);
        let a = vec![true, false, true];
        let mut g = a.clone();
        bitflip_mutation(&mut g, 0.0, &mut rng);
        assert_eq!(g, a);
        bitflip_mutation(&mut g, 1.0, &mut rng);
        assert_eq!(g, vec![false, true, false]);

        let bounds = vec![(0.0, 1.0); 3];
        let mut r = vec![0.2, 0.5, 0.9];
        gaussian_mutation(&mut r, &bounds, 0.0, 1.0, &mut rng).unwrap();
        assert_eq!(r, vec![0.2, 0.5, 0.9]);
    }

    #[test]
    fn malformed_input_is_rejected() {
        let mut rng = substream(3, 0);
        assert!(matches!(
            binary_crossover(&[true], &[true, false], BinaryCrossover::Uniform, &mut rng),
            Err(OsgaError::LengthMismatch(1, 2))
        ));
        let mut g = vec![5.0];
        assert!(matches!(
            gaussian_mutation(&mut g, &[(0.0, 1.0)], 0.1, 1.0, &mut rng),
            Err(OsgaError::OutOfBounds { gene: 0, .. })
        ));
        assert!(real_crossover(&[0.5], &[0.5], &[(1.0, 0.0)], RealCrossover::Arithmetic, &mut rng)
            .is_err());
    }

    proptest! {
        #[test]
        fn mutation_and_crossover_respect_bounds(
            seed in any::<u64>(),
            genes in proptest::collection::vec((-10.0f64..10.0, 0.1f64..5.0, 0.0f64..1.0, 0.0f64..1.0), 1..6),
            sigma in 0.0f64..3.0,
        ) {
            let mut rng = substream(seed, 0);
            let bounds: Vec<(f64, f64)> = genes.iter().map(|(lo, w, _, _)| (*lo, lo + w)).collect();
            let a: Vec<f64> = genes.iter().map(|(lo, w, t, _)| lo + w * t).collect();
            let b: Vec<f64> = genes.iter().map(|(lo, w, _, t)| lo + w * t).collect();
            let mut m = a.clone();
            gaussian_mutation(&mut m, &bounds, sigma, 1.0, &mut rng).unwrap();
            let c = real_crossover(&a, &b, &bounds, RealCrossover::SimulatedBinary { eta: 2.0 }, &mut rng).unwrap();
            for ((x, y), (lo, hi)) in m.iter().zip(&c).zip(&bounds) {
                prop_assert!(x >= lo && x <= hi);
                prop_assert!(y >= lo && y <= hi);
            }
        }
    }
}

use std::fmt::Debug;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::operators::{
    binary_crossover_unchecked, bitflip_mutation, gaussian_mutation_unchecked,
    real_crossover_unchecked, BinaryCrossover, RealCrossover,
};
use crate::rng::Stream;

/// A genome representation together with its variation operators.
pub trait GenomeSpace {
    type Genome: Clone + Debug + PartialEq + Send + Sync;

    /// Number of genes.
    fn genome_len(&self) -> usize;
    fn random(&self, rng: &mut Stream) -> Self::Genome;
    fn crossover(&self, a: &Self::Genome, b: &Self::Genome, rng: &mut Stream) -> Self::Genome;
    fn mutate(&self, genome: &mut Self::Genome, rate: f64, rng: &mut Stream);
}

/// Fixed-length bit strings, e.g. feature masks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySpace {
    pub len: usize,
    /// Probability that a bit is set in the initial population.
    pub init_density: f64,
    pub crossover: BinaryCrossover,
}

impl BinarySpace {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            init_density: 0.1,
            crossover: BinaryCrossover::Uniform,
        }
    }
}

impl GenomeSpace for BinarySpace {
    type Genome = Vec<bool>;

    fn genome_len(&self) -> usize {
        self.len
    }

    fn random(&self, rng: &mut Stream) -> Vec<bool> {
        let p = self.init_density.clamp(0.0, 1.0);
        (0..self.len).map(|_| rng.random_bool(p)).collect()
    }

    fn crossover(&self, a: &Vec<bool>, b: &Vec<bool>, rng: &mut Stream) -> Vec<bool> {
        binary_crossover_unchecked(a, b, self.crossover, rng)
    }

    fn mutate(&self, genome: &mut Vec<bool>, rate: f64, rng: &mut Stream) {
        bitflip_mutation(genome, rate, rng);
    }
}

/// Box-bounded real vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealSpace {
    pub bounds: Vec<(f64, f64)>,
    pub crossover: RealCrossover,
    /// Mutation step as a fraction of each gene's range.
    pub sigma_fraction: f64,
}

impl RealSpace {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Self {
            bounds,
            crossover: RealCrossover::SimulatedBinary { eta: 15.0 },
            sigma_fraction: 0.05,
        }
    }
}

impl GenomeSpace for RealSpace {
    type Genome = Vec<f64>;

    fn genome_len(&self) -> usize {
        self.bounds.len()
    }

    fn random(&self, rng: &mut Stream) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
            .collect()
    }

    fn crossover(&self, a: &Vec<f64>, b: &Vec<f64>, rng: &mut Stream) -> Vec<f64> {
        real_crossover_unchecked(a, b, &self.bounds, self.crossover, rng)
    }

    fn mutate(&self, genome: &mut Vec<f64>, rate: f64, rng: &mut Stream) {
        gaussian_mutation_unchecked(genome, &self.bounds, self.sigma_fraction, rate, rng);
    }
}

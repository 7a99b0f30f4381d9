//! Offspring selection genetic algorithm.
//!
//! Offspring enter the next generation as "successful" only if their fitness
//! beats `cf·better_parent + (1-cf)·worse_parent` (lower is better). Each
//! generation keeps breeding until a `success_ratio` share of the population
//! is filled with successful offspring; the remaining slots go to unsuccessful
//! offspring ("lucky losers"). Selection pressure is the number of offspring
//! bred divided by the population size, and the run stops once it exceeds
//! `max_selection_pressure`.
//!
//! The algorithm is exposed as an ask/tell state machine ([`Osga`]) so that it
//! can sit inside a message-driven node as well as behind a plain evaluator
//! loop ([`osga_minimize`]). Both paths make identical random draws.

mod operators;
mod space;

pub use operators::{
    binary_crossover, bitflip_mutation, gaussian_mutation, real_crossover, BinaryCrossover,
    RealCrossover,
};
pub use space::{BinarySpace, GenomeSpace, RealSpace};

use std::fmt::Display;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Stream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OsgaError {
    #[error("invalid OSGA parameters: {0}")]
    InvalidParams(String),
    #[error("evaluation budget {budget} is smaller than the population size {population}")]
    BudgetTooSmall { budget: usize, population: usize },
    #[error("expected {expected} fitness values, got {got}")]
    BatchMismatch { expected: usize, got: usize },
    #[error("non-finite fitness for genome {genome}")]
    NonFiniteFitness { genome: String },
    #[error("evaluator failed on genome {genome}: {message}")]
    Evaluator { genome: String, message: String },
    #[error("genome lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("gene {gene} = {value} outside [{lo}, {hi}]")]
    OutOfBounds {
        gene: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OsgaParams {
    pub population_size: usize,
    /// Per-gene mutation probability; `None` means `1 / genome length`.
    pub mutation_rate: Option<f64>,
    /// Blend between better (1.0) and worse (0.0) parent in the success test.
    pub comparison_factor: f64,
    /// Share of the population reserved for successful offspring.
    pub success_ratio: f64,
    pub max_selection_pressure: f64,
    pub max_evaluations: usize,
    pub elitism: usize,
    /// Stop once the best fitness is at or below this value.
    pub target_fitness: Option<f64>,
}

impl Default for OsgaParams {
    fn default() -> Self {
        Self {
            population_size: 100,
            mutation_rate: None,
            comparison_factor: 1.0,
            success_ratio: 0.7,
            max_selection_pressure: 100.0,
            max_evaluations: 25_000,
            elitism: 1,
            target_fitness: None,
        }
    }
}

impl OsgaParams {
    pub fn validate(&self) -> Result<(), OsgaError> {
        let fail = |m: String| Err(OsgaError::InvalidParams(m));
        if self.population_size < 2 {
            return fail(format!("population_size {} < 2", self.population_size));
        }
        if self.elitism == 0 || self.elitism >= self.population_size {
            return fail(format!(
                "elitism {} must lie in [1, population_size)",
                self.elitism
            ));
        }
        if !(0.0..=1.0).contains(&self.comparison_factor) {
            return fail(format!("comparison_factor {}", self.comparison_factor));
        }
        if !(self.success_ratio > 0.0 && self.success_ratio <= 1.0) {
            return fail(format!("success_ratio {}", self.success_ratio));
        }
        if !(self.max_selection_pressure > 1.0) {
            return fail(format!(
                "max_selection_pressure {}",
                self.max_selection_pressure
            ));
        }
        if let Some(rate) = self.mutation_rate {
            if !(0.0..=1.0).contains(&rate) {
                return fail(format!("mutation_rate {rate}"));
            }
        }
        if self.max_evaluations < self.population_size {
            return Err(OsgaError::BudgetTooSmall {
                budget: self.max_evaluations,
                population: self.population_size,
            });
        }
        Ok(())
    }

    /// Slots per generation filled by successful offspring.
    pub fn success_quota(&self) -> usize {
        ((self.success_ratio * self.population_size as f64).ceil() as usize)
            .min(self.population_size - self.elitism)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual<G> {
    pub genome: G,
    pub fitness: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    SelectionPressure,
    EvaluationBudget,
    TargetReached,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub offspring_created: usize,
    pub successful: usize,
    pub pressure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult<G> {
    pub best: Individual<G>,
    /// Number of evaluator invocations, initial population included.
    pub evaluations: usize,
    pub generations: usize,
    pub pressure_history: Vec<f64>,
    /// Best fitness after initialization and after every generation.
    pub best_history: Vec<f64>,
    pub termination: Termination,
}

impl<G> RunResult<G> {
    pub fn map_genome<H>(self, f: impl FnOnce(G) -> H) -> RunResult<H> {
        RunResult {
            best: Individual {
                genome: f(self.best.genome),
                fitness: self.best.fitness,
            },
            evaluations: self.evaluations,
            generations: self.generations,
            pressure_history: self.pressure_history,
            best_history: self.best_history,
            termination: self.termination,
        }
    }
}

#[derive(Clone, Debug)]
struct Child<G> {
    genome: G,
    better_parent: f64,
    worse_parent: f64,
}

#[derive(Clone, Debug)]
enum Pending<G> {
    Initial(Vec<G>),
    Offspring(Vec<Child<G>>),
}

#[derive(Clone, Debug)]
struct Generation<G> {
    successes: Vec<Individual<G>>,
    failures: Vec<Individual<G>>,
    created: usize,
}

impl<G> Default for Generation<G> {
    fn default() -> Self {
        Self {
            successes: Vec::new(),
            failures: Vec::new(),
            created: 0,
        }
    }
}

/// Ask/tell driver for one OSGA run.
pub struct Osga<S: GenomeSpace> {
    space: S,
    params: OsgaParams,
    mutation_rate: f64,
    rng: Stream,
    population: Vec<Individual<S::Genome>>,
    generation: Option<Generation<S::Genome>>,
    pending: Option<Pending<S::Genome>>,
    evaluations: usize,
    generations: usize,
    pressure_history: Vec<f64>,
    best_history: Vec<f64>,
    last_stats: Option<GenerationStats>,
    termination: Option<Termination>,
}

impl<S: GenomeSpace> Osga<S> {
    pub fn new(space: S, params: OsgaParams, rng: Stream) -> Result<Self, OsgaError> {
        params.validate()?;
        let mutation_rate = params
            .mutation_rate
            .unwrap_or(1.0 / space.genome_len().max(1) as f64);
        Ok(Self {
            space,
            params,
            mutation_rate,
            rng,
            population: Vec::new(),
            generation: None,
            pending: None,
            evaluations: 0,
            generations: 0,
            pressure_history: Vec::new(),
            best_history: Vec::new(),
            last_stats: None,
            termination: None,
        })
    }

    /// Continues from an already evaluated population.
    pub fn from_population(
        space: S,
        params: OsgaParams,
        population: Vec<Individual<S::Genome>>,
        rng: Stream,
    ) -> Result<Self, OsgaError> {
        let mut osga = Self::new(space, params, rng)?;
        if population.len() != osga.params.population_size {
            return Err(OsgaError::BatchMismatch {
                expected: osga.params.population_size,
                got: population.len(),
            });
        }
        osga.population = population;
        osga.best_history.push(osga.current_best().fitness);
        Ok(osga)
    }

    pub fn params(&self) -> &OsgaParams {
        &self.params
    }

    pub fn population(&self) -> &[Individual<S::Genome>] {
        &self.population
    }

    pub fn is_finished(&self) -> bool {
        self.termination.is_some()
    }

    pub fn generations(&self) -> usize {
        self.generations
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Statistics of the most recently completed generation.
    pub fn last_generation(&self) -> Option<GenerationStats> {
        self.last_stats
    }

    fn current_best(&self) -> &Individual<S::Genome> {
        // first minimum wins, so ties resolve by population order
        self.population
            .iter()
            .reduce(|best, ind| if ind.fitness < best.fitness { ind } else { best })
            .expect("population is non-empty")
    }

    /// Genomes awaiting evaluation, or `None` once the run has terminated.
    ///
    /// Asking again before [`Osga::tell`] returns the same batch.
    pub fn ask(&mut self) -> Option<Vec<S::Genome>> {
        if self.termination.is_some() {
            return None;
        }
        if self.pending.is_none() {
            self.pending = Some(if self.population.is_empty() {
                let genomes = (0..self.params.population_size)
                    .map(|_| self.space.random(&mut self.rng))
                    .collect();
                Pending::Initial(genomes)
            } else {
                Pending::Offspring(self.breed())
            });
        }
        Some(match self.pending.as_ref().expect("set above") {
            Pending::Initial(genomes) => genomes.clone(),
            Pending::Offspring(children) => children.iter().map(|c| c.genome.clone()).collect(),
        })
    }

    fn tournament(&mut self) -> usize {
        let n = self.population.len();
        let a = self.rng.random_range(0..n);
        let b = self.rng.random_range(0..n);
        if self.population[b].fitness < self.population[a].fitness {
            b
        } else {
            a
        }
    }

    fn breed(&mut self) -> Vec<Child<S::Genome>> {
        let generation = self.generation.get_or_insert_with(Generation::default);
        let quota = self.params.success_quota();
        let needed = quota - generation.successes.len();
        let pressure_cap =
            (self.params.max_selection_pressure * self.params.population_size as f64).floor() as usize;
        let pressure_left = (pressure_cap + 1).saturating_sub(generation.created);
        let budget_left = self.params.max_evaluations - self.evaluations;
        let count = needed.min(pressure_left).min(budget_left);

        (0..count)
            .map(|_| {
                let a = self.tournament();
                let b = self.tournament();
                let (fa, fb) = (self.population[a].fitness, self.population[b].fitness);
                let mut genome = self.space.crossover(
                    &self.population[a].genome,
                    &self.population[b].genome,
                    &mut self.rng,
                );
                self.space.mutate(&mut genome, self.mutation_rate, &mut self.rng);
                Child {
                    genome,
                    better_parent: fa.min(fb),
                    worse_parent: fa.max(fb),
                }
            })
            .collect()
    }

    /// Reports fitness values for the batch returned by the last [`Osga::ask`].
    pub fn tell(&mut self, fitness: &[f64]) -> Result<(), OsgaError> {
        let pending = self.pending.take().ok_or(OsgaError::BatchMismatch {
            expected: 0,
            got: fitness.len(),
        })?;
        let expected = match &pending {
            Pending::Initial(g) => g.len(),
            Pending::Offspring(c) => c.len(),
        };
        if expected != fitness.len() {
            self.pending = Some(pending);
            return Err(OsgaError::BatchMismatch {
                expected,
                got: fitness.len(),
            });
        }
        self.evaluations += fitness.len();

        match pending {
            Pending::Initial(genomes) => {
                for (genome, &f) in genomes.into_iter().zip(fitness) {
                    if !f.is_finite() {
                        return Err(OsgaError::NonFiniteFitness {
                            genome: format!("{genome:?}"),
                        });
                    }
                    self.population.push(Individual { genome, fitness: f });
                }
                self.best_history.push(self.current_best().fitness);
                self.check_stop();
            }
            Pending::Offspring(children) => {
                let quota = self.params.success_quota();
                let cf = self.params.comparison_factor;
                let generation = self.generation.as_mut().expect("generation in progress");
                for (child, &f) in children.into_iter().zip(fitness) {
                    if !f.is_finite() {
                        return Err(OsgaError::NonFiniteFitness {
                            genome: format!("{:?}", child.genome),
                        });
                    }
                    generation.created += 1;
                    let threshold = cf * child.better_parent + (1.0 - cf) * child.worse_parent;
                    let ind = Individual {
                        genome: child.genome,
                        fitness: f,
                    };
                    if f < threshold && generation.successes.len() < quota {
                        generation.successes.push(ind);
                    } else {
                        generation.failures.push(ind);
                    }
                }
                let pressure = generation.created as f64 / self.params.population_size as f64;
                if generation.successes.len() >= quota
                    || pressure > self.params.max_selection_pressure
                    || self.evaluations >= self.params.max_evaluations
                {
                    self.close_generation();
                }
            }
        }
        Ok(())
    }

    fn close_generation(&mut self) {
        let generation = self.generation.take().expect("generation in progress");
        let pop = self.params.population_size;

        let mut order: Vec<usize> = (0..self.population.len()).collect();
        order.sort_by(|&a, &b| {
            self.population[a]
                .fitness
                .partial_cmp(&self.population[b].fitness)
                .unwrap()
        });
        let mut next: Vec<Individual<S::Genome>> = order[..self.params.elitism]
            .iter()
            .map(|&i| self.population[i].clone())
            .collect();
        let successful = generation.successes.len();
        next.extend(generation.successes);

        let open = pop - next.len();
        let mut failures = generation.failures;
        if failures.len() > open {
            let mut picks = index::sample(&mut self.rng, failures.len(), open).into_vec();
            picks.sort_unstable();
            next.extend(picks.into_iter().map(|i| failures[i].clone()));
        } else {
            next.append(&mut failures);
            while next.len() < pop {
                let i = self.tournament();
                next.push(self.population[i].clone());
            }
        }

        let pressure = generation.created as f64 / pop as f64;
        self.population = next;
        self.generations += 1;
        self.pressure_history.push(pressure);
        self.best_history.push(self.current_best().fitness);
        self.last_stats = Some(GenerationStats {
            offspring_created: generation.created,
            successful,
            pressure,
        });
        if pressure > self.params.max_selection_pressure {
            self.termination = Some(Termination::SelectionPressure);
        } else {
            self.check_stop();
        }
    }

    fn check_stop(&mut self) {
        if self.termination.is_some() {
            return;
        }
        let best = self.current_best().fitness;
        if self.params.target_fitness.is_some_and(|t| best <= t) {
            self.termination = Some(Termination::TargetReached);
        } else if self.evaluations >= self.params.max_evaluations {
            self.termination = Some(Termination::EvaluationBudget);
        }
    }

    /// Outcome so far. Meaningful once the initial population is evaluated.
    pub fn result(&self) -> RunResult<S::Genome> {
        RunResult {
            best: self.current_best().clone(),
            evaluations: self.evaluations,
            generations: self.generations,
            pressure_history: self.pressure_history.clone(),
            best_history: self.best_history.clone(),
            termination: self.termination.unwrap_or(Termination::EvaluationBudget),
        }
    }
}

fn evaluate_one<G: std::fmt::Debug, E: Display>(
    genome: &G,
    outcome: Result<f64, E>,
) -> Result<f64, OsgaError> {
    outcome.map_err(|e| OsgaError::Evaluator {
        genome: format!("{genome:?}"),
        message: e.to_string(),
    })
}

/// Runs OSGA to termination with a sequential evaluator.
pub fn osga_minimize<S, F, E>(
    space: S,
    params: OsgaParams,
    rng: Stream,
    mut evaluator: F,
) -> Result<RunResult<S::Genome>, OsgaError>
where
    S: GenomeSpace,
    F: FnMut(&S::Genome) -> Result<f64, E>,
    E: Display,
{
    let mut osga = Osga::new(space, params, rng)?;
    while let Some(batch) = osga.ask() {
        let fitness = batch
            .iter()
            .map(|g| evaluate_one(g, evaluator(g)))
            .collect::<Result<Vec<_>, _>>()?;
        osga.tell(&fitness)?;
    }
    Ok(osga.result())
}

/// Like [`osga_minimize`], evaluating each batch concurrently. Acceptance is
/// decided in batch order, so results do not depend on the thread count.
pub fn osga_minimize_parallel<S, F, E>(
    space: S,
    params: OsgaParams,
    rng: Stream,
    evaluator: F,
) -> Result<RunResult<S::Genome>, OsgaError>
where
    S: GenomeSpace,
    F: Fn(&S::Genome) -> Result<f64, E> + Sync,
    E: Display,
{
    let mut osga = Osga::new(space, params, rng)?;
    while let Some(batch) = osga.ask() {
        let fitness = batch
            .par_iter()
            .map(|g| evaluate_one(g, evaluator(g)))
            .collect::<Result<Vec<_>, _>>()?;
        osga.tell(&fitness)?;
    }
    Ok(osga.result())
}

/// Advances an evaluated population by exactly one generation.
pub fn offspring_selection_step<S, F, E>(
    space: S,
    population: Vec<Individual<S::Genome>>,
    params: OsgaParams,
    rng: Stream,
    mut evaluator: F,
) -> Result<(Vec<Individual<S::Genome>>, GenerationStats), OsgaError>
where
    S: GenomeSpace,
    F: FnMut(&S::Genome) -> Result<f64, E>,
    E: Display,
{
    // The step is not bounded by the run-level budget.
    let params = OsgaParams {
        max_evaluations: usize::MAX,
        target_fitness: None,
        ..params
    };
    let mut osga = Osga::from_population(space, params, population, rng)?;
    while osga.generations() == 0 {
        let batch = osga.ask().expect("generation in progress");
        let fitness = batch
            .iter()
            .map(|g| evaluate_one(g, evaluator(g)))
            .collect::<Result<Vec<_>, _>>()?;
        osga.tell(&fitness)?;
    }
    let stats = osga.last_generation().expect("one generation completed");
    Ok((osga.population, stats))
}

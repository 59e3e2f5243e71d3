//! Differential evolution with binomial crossover and greedy selection,
//! maximizing the objective.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::{EvalContext, Objective};

/// Mutation base: a random population member or the current best.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeStrategy {
    #[default]
    Rand1Bin,
    Best1Bin,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeConfig {
    /// Population size; at least 4 so rand/1 can pick three distinct donors.
    pub np: usize,
    /// Differential weight applied to the donor difference, in (0, 2].
    pub weight: f64,
    /// Crossover rate in [0, 1]; one gene always comes from the mutant.
    pub crossover: f64,
    pub strategy: DeStrategy,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            np: 30,
            weight: 0.8,
            crossover: 0.9,
            strategy: DeStrategy::Rand1Bin,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.np < 4 {
            return Err(Error::config(format!(
                "population size must be at least 4, got {}",
                self.np
            )));
        }
        if !(self.weight > 0.0 && self.weight <= 2.0) {
            return Err(Error::config(format!(
                "differential weight must be in (0, 2], got {}",
                self.weight
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::config(format!(
                "crossover rate must be in [0, 1], got {}",
                self.crossover
            )));
        }
        Ok(())
    }
}

/// Population, cached fitness and the incumbent best.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub population: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub best_genome: Vec<f64>,
    pub best_fitness: f64,
    pub generation: u64,
    pub evaluations: u64,
}

impl SearchState {
    pub fn mean_fitness(&self) -> f64 {
        self.fitness.iter().sum::<f64>() / self.fitness.len() as f64
    }

    pub fn std_fitness(&self) -> f64 {
        let mean = self.mean_fitness();
        let var = self
            .fitness
            .iter()
            .map(|f| (f - mean).powi(2))
            .sum::<f64>()
            / self.fitness.len() as f64;
        var.sqrt()
    }

    fn refresh_best(&mut self) {
        for (genome, &fit) in self.population.iter().zip(&self.fitness) {
            if fit > self.best_fitness {
                self.best_fitness = fit;
                self.best_genome = genome.clone();
            }
        }
    }
}

/// Uniform-random population inside the box, optionally seeding slot 0 with
/// a provided genome, all evaluated once.
pub fn init_search_state(
    bounds: &[(f64, f64)],
    np: usize,
    initial: Option<&[f64]>,
    objective: &mut dyn Objective,
    rng: &mut ChaCha8Rng,
) -> Result<SearchState> {
    if bounds.is_empty() {
        return Err(Error::config("search space has no dimensions"));
    }
    if bounds.iter().any(|(lo, hi)| lo >= hi) {
        return Err(Error::config("each search bound needs low < high"));
    }
    let dim = bounds.len();
    let mut population: Vec<Vec<f64>> = Vec::with_capacity(np);
    for i in 0..np {
        let genome: Vec<f64> = match (i, initial) {
            (0, Some(init)) => {
                if init.len() != dim {
                    return Err(Error::config("initial genome length does not match bounds"));
                }
                init.iter()
                    .zip(bounds)
                    .map(|(&v, &(lo, hi))| v.clamp(lo, hi))
                    .collect()
            }
            _ => bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect(),
        };
        population.push(genome);
    }
    let fitness: Vec<f64> = population
        .iter()
        .enumerate()
        .map(|(slot, genome)| objective.evaluate(genome, EvalContext { generation: 0, slot }))
        .collect();
    let mut state = SearchState {
        population,
        fitness,
        best_genome: Vec::new(),
        best_fitness: f64::NEG_INFINITY,
        generation: 0,
        evaluations: np as u64,
    };
    state.refresh_best();
    Ok(state)
}

fn distinct_indices<const N: usize>(
    rng: &mut ChaCha8Rng,
    np: usize,
    exclude: usize,
) -> [usize; N] {
    let mut out = [0usize; N];
    let mut filled = 0;
    while filled < N {
        let candidate = rng.random_range(0..np);
        if candidate != exclude && !out[..filled].contains(&candidate) {
            out[filled] = candidate;
            filled += 1;
        }
    }
    out
}

/// Advances the population by one generation: mutate, cross over, clamp,
/// evaluate, select greedily. Exactly `np` objective evaluations.
pub fn de_generation(
    state: &mut SearchState,
    bounds: &[(f64, f64)],
    cfg: &DeConfig,
    objective: &mut dyn Objective,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    cfg.validate()?;
    if state.population.len() != cfg.np {
        return Err(Error::config("search state does not match configured population size"));
    }
    let dim = bounds.len();
    let generation = state.generation + 1;
    for i in 0..cfg.np {
        let mut trial = vec![0.0; dim];
        {
            let target = &state.population[i];
            let (base, d1, d2): (&[f64], &[f64], &[f64]) = match cfg.strategy {
                DeStrategy::Rand1Bin => {
                    let [r1, r2, r3] = distinct_indices::<3>(rng, cfg.np, i);
                    (
                        &state.population[r1],
                        &state.population[r2],
                        &state.population[r3],
                    )
                }
                DeStrategy::Best1Bin => {
                    let [r1, r2] = distinct_indices::<2>(rng, cfg.np, i);
                    (
                        &state.best_genome,
                        &state.population[r1],
                        &state.population[r2],
                    )
                }
            };
            let forced = rng.random_range(0..dim);
            for d in 0..dim {
                let mutant = base[d] + cfg.weight * (d1[d] - d2[d]);
                let from_mutant = d == forced || rng.random::<f64>() < cfg.crossover;
                trial[d] = if from_mutant { mutant } else { target[d] };
                trial[d] = trial[d].clamp(bounds[d].0, bounds[d].1);
            }
        }
        let trial_fitness = objective.evaluate(&trial, EvalContext { generation, slot: i });
        state.evaluations += 1;
        if trial_fitness >= state.fitness[i] {
            if trial_fitness > state.best_fitness {
                state.best_fitness = trial_fitness;
                state.best_genome = trial.clone();
            }
            state.population[i] = trial;
            state.fitness[i] = trial_fitness;
        }
    }
    state.generation = generation;
    Ok(())
}

//! Random local search: perturb the incumbent inside a shrinking box and
//! keep improvements. The cheap alternative to differential evolution for
//! smooth single-basin objectives.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::de::SearchState;
use crate::search::{EvalContext, Objective};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LocalSearchConfig {
    /// Perturbations tried per round (one round = one "generation").
    pub trials_per_round: usize,
    /// Initial perturbation half-width as a fraction of each bound's width.
    pub sigma: f64,
    /// Multiplicative shrink applied to sigma after every round.
    pub sigma_decay: f64,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        Self {
            trials_per_round: 30,
            sigma: 0.25,
            sigma_decay: 0.98,
        }
    }
}

impl LocalSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_round == 0 {
            return Err(Error::config("local search needs at least one trial per round"));
        }
        if self.sigma <= 0.0 || self.sigma.is_nan() || !(0.0..=1.0).contains(&self.sigma_decay) {
            return Err(Error::config("sigma must be positive and decay within [0, 1]"));
        }
        Ok(())
    }

    /// Perturbation half-width at a given round.
    pub fn sigma_at(&self, round: u64) -> f64 {
        self.sigma * self.sigma_decay.powf(round as f64)
    }
}

/// One round of incumbent perturbation with greedy acceptance. Uses the
/// same state shape as the evolutionary path so drivers can treat both
/// uniformly; the population stores the single incumbent.
pub fn local_search_round(
    state: &mut SearchState,
    bounds: &[(f64, f64)],
    cfg: &LocalSearchConfig,
    objective: &mut dyn Objective,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    cfg.validate()?;
    let sigma = cfg.sigma_at(state.generation);
    let generation = state.generation + 1;
    for slot in 0..cfg.trials_per_round {
        let candidate: Vec<f64> = state
            .best_genome
            .iter()
            .zip(bounds)
            .map(|(&v, &(lo, hi))| {
                let width = hi - lo;
                (v + rng.random_range(-sigma * width..sigma * width)).clamp(lo, hi)
            })
            .collect();
        let fitness = objective.evaluate(&candidate, EvalContext { generation, slot });
        state.evaluations += 1;
        if fitness >= state.best_fitness {
            state.best_fitness = fitness;
            state.best_genome = candidate;
        }
    }
    state.population[0] = state.best_genome.clone();
    state.fitness[0] = state.best_fitness;
    state.generation = generation;
    Ok(())
}

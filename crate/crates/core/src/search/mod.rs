//! Black-box search over controller genomes driven by episode returns.
//!
//! The objective of a genome is its mean episode score over a small batch of
//! seeded episodes. A population optimizer (differential evolution by
//! default, random local search as the alternative) maximizes that
//! objective; the driver in this module wires the two together, tracks the
//! incumbent and enforces episode budgets.

mod de;
mod driver;
mod local;

pub use de::{de_generation, init_search_state, DeConfig, DeStrategy, SearchState};
pub use driver::{
    cbrl_search, CbrlConfig, Checkpoint, GenerationRecord, QBridge, SearchMethod, SearchResult,
    StopCriteria,
};
pub use local::{local_search_round, LocalSearchConfig};

use serde::{Deserialize, Serialize};

use crate::controllers::{Controller, ControllerSpec, Quantizer};
use crate::envs::{run_episode, Environment};
use crate::error::Result;
use crate::seeding::derive_seed;

/// How evaluation episodes are seeded.
///
/// `FixedSet` evaluates every candidate on the same episode seeds (common
/// random numbers), so fitness values stay comparable across generations.
/// `FreshPerGeneration` redraws the seed batch each generation, trading
/// comparability for robustness against overfitting the fixed batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    #[default]
    FixedSet,
    FreshPerGeneration,
}

/// Episode batch size and seeding policy for one fitness evaluation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitnessConfig {
    /// Episodes averaged per evaluation.
    pub episodes_per_eval: usize,
    pub seed_mode: SeedMode,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            episodes_per_eval: 5,
            seed_mode: SeedMode::FixedSet,
        }
    }
}

/// Identifies one objective evaluation within a run, for seed derivation.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext {
    pub generation: u64,
    pub slot: usize,
}

/// A maximized black-box objective. `&mut self` lets implementations log
/// per-episode scores or budgets as a side channel.
pub trait Objective {
    fn evaluate(&mut self, genome: &[f64], ctx: EvalContext) -> f64;
}

impl<F: FnMut(&[f64], EvalContext) -> f64> Objective for F {
    fn evaluate(&mut self, genome: &[f64], ctx: EvalContext) -> f64 {
        self(genome, ctx)
    }
}

/// Seed of the `k`-th evaluation episode under `base_seed` and the seeding
/// policy.
pub fn episode_seed(base_seed: u64, mode: SeedMode, generation: u64, k: usize) -> u64 {
    match mode {
        SeedMode::FixedSet => derive_seed(base_seed, "fitness", &[k as u64]),
        SeedMode::FreshPerGeneration => derive_seed(base_seed, "fitness", &[generation, k as u64]),
    }
}

/// Mean episode score of a genome: the search objective.
///
/// Pure in (environment, spec, genome, config, base seed, generation).
pub fn fitness(
    env: &dyn Environment,
    spec: &ControllerSpec,
    quantizer: Quantizer,
    genome: &[f64],
    cfg: FitnessConfig,
    base_seed: u64,
    generation: u64,
) -> Result<f64> {
    let controller = Controller::new(spec.clone(), genome.to_vec(), quantizer)?;
    let mut total = 0.0;
    for k in 0..cfg.episodes_per_eval.max(1) {
        let seed = episode_seed(base_seed, cfg.seed_mode, generation, k);
        total += run_episode(env, &controller, seed, false)?.total_reward;
    }
    Ok(total / cfg.episodes_per_eval.max(1) as f64)
}

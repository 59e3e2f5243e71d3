//! The search driver: evaluates genomes by episode batches, advances the
//! optimizer generation by generation and enforces the stop criteria.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::{Controller, ControllerSpec, PartitionRule, Quantizer};
use crate::envs::{run_episode, Environment, EpisodeOutcome};
use crate::error::{Error, Result};
use crate::search::de::{de_generation, init_search_state, DeConfig, SearchState};
use crate::search::local::{local_search_round, LocalSearchConfig};
use crate::search::{episode_seed, EvalContext, FitnessConfig, Objective};
use crate::seeding::{derive_seed, rng_from_seed};

/// Which optimizer advances the population.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "optimizer", rename_all = "snake_case")]
pub enum SearchMethod {
    De(DeConfig),
    LocalSearch(LocalSearchConfig),
}

impl Default for SearchMethod {
    fn default() -> Self {
        SearchMethod::De(DeConfig::default())
    }
}

impl SearchMethod {
    /// Objective evaluations per generation.
    fn evals_per_generation(&self) -> usize {
        match self {
            SearchMethod::De(cfg) => cfg.np,
            SearchMethod::LocalSearch(cfg) => cfg.trials_per_round,
        }
    }

    fn population_size(&self) -> usize {
        match self {
            SearchMethod::De(cfg) => cfg.np,
            SearchMethod::LocalSearch(_) => 1,
        }
    }
}

/// When to stop searching. At least one criterion must be set.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StopCriteria {
    /// Hard episode budget, never exceeded.
    pub max_episodes: Option<u64>,
    pub max_generations: Option<u64>,
    /// Stop once the incumbent fitness reaches this value.
    pub target_fitness: Option<f64>,
}

impl StopCriteria {
    pub fn max_episodes(budget: u64) -> Self {
        Self {
            max_episodes: Some(budget),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_episodes.is_none()
            && self.max_generations.is_none()
            && self.target_fitness.is_none()
        {
            return Err(Error::config("search needs at least one stop criterion"));
        }
        Ok(())
    }
}

/// Per-generation summary of the population.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    /// Episodes consumed so far, including initialization.
    pub episodes: u64,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
}

/// Running mean of observed returns-to-go per (controller-partition region,
/// population slot). Off by default; the plain search keeps episode totals
/// only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QBridge {
    n_regions: usize,
    n_slots: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl QBridge {
    fn new(n_regions: usize, n_slots: usize) -> Self {
        Self {
            n_regions,
            n_slots,
            sums: vec![0.0; n_regions * n_slots],
            counts: vec![0; n_regions * n_slots],
        }
    }

    fn record_episode(&mut self, outcome: &EpisodeOutcome, slot: usize, rule: &PartitionRule) {
        let Some(trace) = outcome.trace.as_ref() else {
            return;
        };
        // suffix sums give the undiscounted return-to-go at each step
        let mut to_go = 0.0;
        let mut entries = Vec::with_capacity(trace.len());
        for step in trace.iter().rev() {
            to_go += step.reward;
            entries.push((rule.region_of(&step.state), to_go));
        }
        for (region, value) in entries {
            let idx = region * self.n_slots + slot;
            self.sums[idx] += value;
            self.counts[idx] += 1;
        }
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    /// Mean return-to-go observed from `region` under the candidate in
    /// `slot`, if that pair was ever visited.
    pub fn mean(&self, region: usize, slot: usize) -> Option<f64> {
        let idx = region * self.n_slots + slot;
        (self.counts[idx] > 0).then(|| self.sums[idx] / self.counts[idx] as f64)
    }
}

/// Full search configuration minus the seed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CbrlConfig {
    pub fitness: FitnessConfig,
    pub method: SearchMethod,
    pub stop: StopCriteria,
    /// Optional warm start placed in population slot 0.
    #[serde(default)]
    pub initial_genome: Option<Vec<f64>>,
    /// Maintain the per-(region, slot) return table while searching.
    #[serde(default)]
    pub track_region_returns: bool,
    /// With fixed evaluation seeds the winning genome can overfit its small
    /// episode batch. When set, the final population and the incumbent are
    /// re-scored on this many held-out episodes and the best re-scored
    /// genome is returned. The extra episodes are reserved out of
    /// `stop.max_episodes`, so the stated budget still holds.
    #[serde(default)]
    pub validation_episodes: Option<usize>,
}

/// Incumbent, accounting and per-generation history of a finished search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_genome: Vec<f64>,
    pub best_fitness: f64,
    pub generations: u64,
    pub episodes: u64,
    pub history: Vec<GenerationRecord>,
    /// Every episode score in evaluation order; the training curve.
    pub episode_log: Vec<f64>,
    pub region_returns: Option<QBridge>,
    /// Final optimizer snapshot, resumable.
    pub checkpoint: Checkpoint,
}

impl SearchResult {
    /// History as CSV with a versioned header.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("# cbrl search history v1\ngeneration,episodes,best,mean,std\n");
        for rec in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                rec.generation, rec.episodes, rec.best, rec.mean, rec.std
            ));
        }
        out
    }
}

/// Resumable snapshot of an in-flight search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub generation: u64,
    pub evaluations: u64,
    pub population: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub best_genome: Vec<f64>,
    pub best_fitness: f64,
    /// Exact optimizer RNG state.
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    pub fn capture(state: &SearchState, rng: &ChaCha8Rng) -> Self {
        Self {
            generation: state.generation,
            evaluations: state.evaluations,
            population: state.population.clone(),
            fitness: state.fitness.clone(),
            best_genome: state.best_genome.clone(),
            best_fitness: state.best_fitness,
            rng: rng.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Objective wrapper that runs episode batches and logs every score.
struct EpisodeObjective<'a> {
    env: &'a dyn Environment,
    spec: &'a ControllerSpec,
    quantizer: Quantizer,
    fitness: FitnessConfig,
    base_seed: u64,
    episode_log: Vec<f64>,
    bridge: Option<QBridge>,
}

impl Objective for EpisodeObjective<'_> {
    fn evaluate(&mut self, genome: &[f64], ctx: EvalContext) -> f64 {
        let controller = Controller::new(self.spec.clone(), genome.to_vec(), self.quantizer)
            .expect("spec and quantizer validated before the search started");
        let k = self.fitness.episodes_per_eval.max(1);
        let mut total = 0.0;
        for i in 0..k {
            let seed = episode_seed(self.base_seed, self.fitness.seed_mode, ctx.generation, i);
            let outcome = run_episode(self.env, &controller, seed, self.bridge.is_some())
                .expect("environment and controller dimensions validated");
            total += outcome.total_reward;
            self.episode_log.push(outcome.total_reward);
            if let Some(bridge) = self.bridge.as_mut() {
                bridge.record_episode(&outcome, ctx.slot, &self.spec.partition);
            }
        }
        total / k as f64
    }
}

/// Searches controller space for `env`, maximizing mean episode score.
///
/// Deterministic in (environment, spec, config, seed): the optimizer draws
/// from a dedicated stream and every evaluation episode's seed is derived
/// from (seed, generation, episode index), so results do not depend on
/// evaluation order.
pub fn cbrl_search(
    env: &dyn Environment,
    spec: &ControllerSpec,
    quantizer: Quantizer,
    cfg: &CbrlConfig,
    seed: u64,
) -> Result<SearchResult> {
    spec.validate()?;
    cfg.stop.validate()?;
    if cfg.fitness.episodes_per_eval == 0 {
        return Err(Error::config("fitness needs at least one episode per evaluation"));
    }
    let env_spec = env.spec();
    if env_spec.state_dim != spec.state_dim {
        return Err(Error::config(format!(
            "controller expects {}-dimensional states, {} provides {}",
            spec.state_dim,
            env.name(),
            env_spec.state_dim
        )));
    }
    if quantizer.control_dim() != spec.control_dim {
        return Err(Error::config("quantizer does not match the controller's control dims"));
    }
    if quantizer.action_count() > env_spec.n_actions {
        return Err(Error::config(format!(
            "quantizer emits up to {} actions, {} accepts {}",
            quantizer.action_count(),
            env.name(),
            env_spec.n_actions
        )));
    }
    if let SearchMethod::De(de) = &cfg.method {
        de.validate()?;
    }

    let bounds = spec.genome_bounds();
    let k = cfg.fitness.episodes_per_eval as u64;
    let mut objective = EpisodeObjective {
        env,
        spec,
        quantizer,
        fitness: cfg.fitness,
        base_seed: derive_seed(seed, "fitness-base", &[]),
        episode_log: Vec::new(),
        bridge: cfg
            .track_region_returns
            .then(|| QBridge::new(spec.partition.n_regions(), cfg.method.population_size())),
    };
    let mut rng = rng_from_seed(derive_seed(seed, "optimizer", &[]));
    let mut state = init_search_state(
        &bounds,
        cfg.method.population_size(),
        cfg.initial_genome.as_deref(),
        &mut objective,
        &mut rng,
    )?;

    // hold back enough budget for the optional validation pass
    let validation = cfg.validation_episodes.unwrap_or(0);
    let reserved = validation as u64 * (cfg.method.population_size() as u64 + 1);

    let mut history = vec![record_of(&state, k)];
    loop {
        if let Some(target) = cfg.stop.target_fitness {
            if state.best_fitness >= target {
                break;
            }
        }
        if let Some(max_gen) = cfg.stop.max_generations {
            if state.generation >= max_gen {
                break;
            }
        }
        if let Some(max_episodes) = cfg.stop.max_episodes {
            let upcoming = cfg.method.evals_per_generation() as u64 * k;
            if state.evaluations * k + upcoming + reserved > max_episodes {
                break;
            }
        }
        match &cfg.method {
            SearchMethod::De(de) => de_generation(&mut state, &bounds, de, &mut objective, &mut rng)?,
            SearchMethod::LocalSearch(ls) => {
                local_search_round(&mut state, &bounds, ls, &mut objective, &mut rng)?
            }
        }
        history.push(record_of(&state, k));
    }

    let mut best_genome = state.best_genome.clone();
    let mut best_fitness = state.best_fitness;
    let mut validation_episodes_used = 0u64;
    if validation > 0 {
        let score = |genome: &[f64], objective: &mut EpisodeObjective| -> f64 {
            let controller =
                Controller::new(objective.spec.clone(), genome.to_vec(), objective.quantizer)
                    .expect("validated");
            let mut total = 0.0;
            for i in 0..validation {
                let seed = derive_seed(objective.base_seed, "validation", &[i as u64]);
                let outcome = run_episode(objective.env, &controller, seed, false)
                    .expect("validated");
                objective.episode_log.push(outcome.total_reward);
                total += outcome.total_reward;
            }
            total / validation as f64
        };
        best_fitness = score(&best_genome, &mut objective);
        validation_episodes_used += validation as u64;
        for slot in 0..state.population.len() {
            let candidate = state.population[slot].clone();
            let value = score(&candidate, &mut objective);
            validation_episodes_used += validation as u64;
            if value > best_fitness {
                best_fitness = value;
                best_genome = candidate;
            }
        }
    }

    Ok(SearchResult {
        best_genome,
        best_fitness,
        generations: state.generation,
        episodes: state.evaluations * k + validation_episodes_used,
        history,
        episode_log: objective.episode_log,
        region_returns: objective.bridge,
        checkpoint: Checkpoint::capture(&state, &rng),
    })
}

fn record_of(state: &SearchState, episodes_per_eval: u64) -> GenerationRecord {
    GenerationRecord {
        generation: state.generation,
        episodes: state.evaluations * episodes_per_eval,
        best: state.best_fitness,
        mean: state.mean_fitness(),
        std: state.std_fitness(),
    }
}

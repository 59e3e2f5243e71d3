//! Benchmark environments with pure, seed-deterministic dynamics.
//!
//! Environments carry no episode state: `reset` maps a seed to an initial
//! state and `step` maps (state, action) to the next state, so outcomes are
//! functions of (parameters, controller, seed) and instances can be shared
//! freely across threads.

mod cartpole;
mod lander;
mod mountain_car;

pub use cartpole::{CartPole, CartPoleParams};
pub use lander::{Lander, LanderParams, LANDER_LEFT, LANDER_MAIN, LANDER_NOOP, LANDER_RIGHT};
pub use mountain_car::{MountainCar, MountainCarParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions, bounds and episode limits of an environment.
///
/// `state_bounds` double as the clamp ranges used when a grid discretizer is
/// laid over the state space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub state_bounds: Vec<(f64, f64)>,
    pub n_actions: usize,
    pub control_dim: usize,
    pub max_steps: usize,
}

impl EnvSpec {
    fn validate(&self) -> Result<()> {
        if self.state_bounds.len() != self.state_dim {
            return Err(Error::config("state_bounds must match state_dim"));
        }
        if self.state_bounds.iter().any(|(lo, hi)| lo >= hi) {
            return Err(Error::config("each state bound needs low < high"));
        }
        if self.max_steps == 0 || self.control_dim == 0 || self.n_actions == 0 {
            return Err(Error::config("spec dimensions must be positive"));
        }
        Ok(())
    }
}

/// Result of one environment transition.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// One recorded step of an episode trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

/// Score and length of a finished episode, with an optional full trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    /// Undiscounted sum of rewards: the episode's score.
    pub total_reward: f64,
    pub steps: usize,
    pub trace: Option<Vec<TraceStep>>,
}

impl EpisodeOutcome {
    /// Trace as CSV with a versioned header, one row per step.
    pub fn trace_csv(&self) -> Option<String> {
        let trace = self.trace.as_ref()?;
        let dim = trace.first().map_or(0, |t| t.state.len());
        let mut out = String::from("# cbrl trace v1\n");
        out.push_str("step");
        for d in 0..dim {
            out.push_str(&format!(",s{d}"));
        }
        out.push_str(",action,reward\n");
        for (i, t) in trace.iter().enumerate() {
            out.push_str(&i.to_string());
            for v in &t.state {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{},{}\n", t.action, t.reward));
        }
        Some(out)
    }
}

/// A pure environment: dynamics plus a seeded initial-state distribution.
pub trait Environment: Send + Sync {
    fn name(&self) -> &'static str;
    fn spec(&self) -> &EnvSpec;
    /// Initial state drawn from the environment's start distribution.
    /// Identical seeds give identical states.
    fn reset(&self, seed: u64) -> Vec<f64>;
    /// Applies `action` to `state`. Errors on an invalid action index.
    fn step(&self, state: &[f64], action: usize) -> Result<StepResult>;
}

/// Anything that picks a discrete action from a state. Implemented by the
/// controller families and by frozen greedy Q-tables.
pub trait Agent {
    fn act(&self, state: &[f64]) -> usize;
    /// State dimension the agent expects, if it has one.
    fn state_dim(&self) -> Option<usize> {
        None
    }
}

/// The environments this crate ships, selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    CartPole,
    MountainCar,
    Lander,
}

impl EnvKind {
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "cartpole" => Ok(EnvKind::CartPole),
            "mountaincar" => Ok(EnvKind::MountainCar),
            "lander" => Ok(EnvKind::Lander),
            other => Err(Error::invalid(format!(
                "unknown environment '{other}' (expected cartpole | mountaincar | lander)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole",
            EnvKind::MountainCar => "mountaincar",
            EnvKind::Lander => "lander",
        }
    }

    /// Environment with default physics.
    pub fn build(self) -> Box<dyn Environment> {
        match self {
            EnvKind::CartPole => Box::new(CartPole::default()),
            EnvKind::MountainCar => Box::new(MountainCar::default()),
            EnvKind::Lander => Box::new(Lander::default()),
        }
    }

    /// Training score at which the problem counts as solved; used for the
    /// episodes-to-threshold column of comparison tables.
    pub fn solve_threshold(self) -> f64 {
        match self {
            EnvKind::CartPole => 200.0,
            EnvKind::MountainCar => -110.0,
            EnvKind::Lander => 100.0,
        }
    }
}

/// Physics parameters for one environment kind, for configs that override
/// the defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvParams {
    CartPole(CartPoleParams),
    MountainCar(MountainCarParams),
    Lander(LanderParams),
}

impl EnvParams {
    pub fn kind(&self) -> EnvKind {
        match self {
            EnvParams::CartPole(_) => EnvKind::CartPole,
            EnvParams::MountainCar(_) => EnvKind::MountainCar,
            EnvParams::Lander(_) => EnvKind::Lander,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvParams::CartPole(p) => Box::new(CartPole::new(p.clone())?),
            EnvParams::MountainCar(p) => Box::new(MountainCar::new(p.clone())?),
            EnvParams::Lander(p) => Box::new(Lander::new(p.clone())?),
        })
    }
}

/// Plays `agent` in `env` from a seeded reset until termination or the step
/// cap. Fully deterministic given (environment, agent, seed).
pub fn run_episode(
    env: &dyn Environment,
    agent: &dyn Agent,
    seed: u64,
    record_trace: bool,
) -> Result<EpisodeOutcome> {
    let spec = env.spec();
    if let Some(dim) = agent.state_dim() {
        if dim != spec.state_dim {
            return Err(Error::config(format!(
                "agent expects {dim}-dimensional states but {} provides {}",
                env.name(),
                spec.state_dim
            )));
        }
    }
    let mut state = env.reset(seed);
    let mut total = 0.0;
    let mut steps = 0;
    let mut trace = record_trace.then(Vec::new);
    while steps < spec.max_steps {
        let action = agent.act(&state);
        let result = env.step(&state, action)?;
        total += result.reward;
        steps += 1;
        if let Some(t) = trace.as_mut() {
            t.push(TraceStep {
                state: state.clone(),
                action,
                reward: result.reward,
            });
        }
        state = result.state;
        if result.done {
            break;
        }
    }
    Ok(EpisodeOutcome {
        total_reward: total,
        steps,
        trace,
    })
}


#[cfg(test)]
mod tests {
    use super::test_support::ConstantAgent;
    use super::*;

    #[test]
    fn env_kind_roundtrip() {
        for kind in [EnvKind::CartPole, EnvKind::MountainCar, EnvKind::Lander] {
            assert_eq!(EnvKind::from_name(kind.name()).unwrap(), kind);
        }
        assert!(EnvKind::from_name("pendulum").is_err());
    }

    #[test]
    fn identical_seeds_identical_outcomes() {
        for kind in [EnvKind::CartPole, EnvKind::MountainCar, EnvKind::Lander] {
            let env = kind.build();
            let agent = ConstantAgent(0);
            let a = run_episode(env.as_ref(), &agent, 99, true).unwrap();
            let b = run_episode(env.as_ref(), &agent, 99, true).unwrap();
            assert_eq!(a.total_reward, b.total_reward);
            assert_eq!(a.steps, b.steps);
            assert_eq!(
                serde_json::to_string(&a.trace).unwrap(),
                serde_json::to_string(&b.trace).unwrap()
            );
        }
    }

    #[test]
    fn episode_scores_stay_in_their_bounds() {
        // any action sequence keeps totals inside the documented ranges
        struct Cycler(usize);
        impl Agent for Cycler {
            fn act(&self, state: &[f64]) -> usize {
                (state.iter().map(|v| v.abs()).sum::<f64>() * 1e6) as usize % self.0
            }
        }
        let cartpole = EnvKind::CartPole.build();
        let mountaincar = EnvKind::MountainCar.build();
        for seed in 0..50 {
            let cp = run_episode(cartpole.as_ref(), &Cycler(2), seed, false).unwrap();
            assert!((1.0..=200.0).contains(&cp.total_reward), "{}", cp.total_reward);
            let mc = run_episode(mountaincar.as_ref(), &Cycler(3), seed, false).unwrap();
            assert!((-200.0..=-1.0).contains(&mc.total_reward), "{}", mc.total_reward);
        }
    }

    #[test]
    fn trace_length_matches_steps() {
        let env = EnvKind::MountainCar.build();
        let outcome = run_episode(env.as_ref(), &ConstantAgent(1), 4, true).unwrap();
        assert_eq!(outcome.trace.as_ref().unwrap().len(), outcome.steps);
        let csv = outcome.trace_csv().unwrap();
        assert!(csv.starts_with("# cbrl trace v1\nstep,s0,s1,action,reward\n"));
        // header + column row + one line per step
        assert_eq!(csv.lines().count(), 2 + outcome.steps);
    }
}

//! The underpowered car in a valley.
//!
//! State is (position, velocity); actions are backward, neutral, forward.
//! Each step pays -1 until the car reaches the goal position, so the score
//! is the negated number of steps taken, with -200 meaning the 200-step cap
//! ran out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{EnvSpec, Environment, StepResult};
use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MountainCarParams {
    pub min_position: f64,
    pub max_position: f64,
    pub max_speed: f64,
    pub goal_position: f64,
    pub force: f64,
    pub gravity_scale: f64,
    pub max_steps: usize,
}

impl Default for MountainCarParams {
    fn default() -> Self {
        Self {
            min_position: -1.2,
            max_position: 0.6,
            max_speed: 0.07,
            goal_position: 0.5,
            force: 0.001,
            gravity_scale: 0.0025,
            max_steps: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MountainCar {
    params: MountainCarParams,
    spec: EnvSpec,
}

impl MountainCar {
    pub fn new(params: MountainCarParams) -> Result<Self> {
        let spec = EnvSpec {
            state_dim: 2,
            state_bounds: vec![
                (params.min_position, params.max_position),
                (-params.max_speed, params.max_speed),
            ],
            n_actions: 3,
            control_dim: 1,
            max_steps: params.max_steps,
        };
        spec.validate()?;
        Ok(Self { params, spec })
    }
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new(MountainCarParams::default()).expect("default parameters are valid")
    }
}

impl Environment for MountainCar {
    fn name(&self) -> &'static str {
        "mountaincar"
    }

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        vec![rng.random_range(-0.6..-0.4), 0.0]
    }

    fn step(&self, state: &[f64], action: usize) -> Result<StepResult> {
        if action >= 3 {
            return Err(Error::invalid(format!(
                "mountaincar action {action} out of range"
            )));
        }
        let p = &self.params;
        let (pos, vel) = (state[0], state[1]);
        let mut new_vel = vel + (action as f64 - 1.0) * p.force
            - p.gravity_scale * (3.0 * pos).cos();
        new_vel = new_vel.clamp(-p.max_speed, p.max_speed);
        let mut new_pos = (pos + new_vel).clamp(p.min_position, p.max_position);
        // hitting the left wall kills the velocity
        if new_pos <= p.min_position && new_vel < 0.0 {
            new_vel = 0.0;
            new_pos = p.min_position;
        }
        let done = new_pos >= p.goal_position;
        Ok(StepResult {
            state: vec![new_pos, new_vel],
            reward: -1.0,
            done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::run_episode;
    use crate::envs::test_support::ConstantAgent;

    #[test]
    fn reset_matches_start_distribution() {
        let env = MountainCar::default();
        for seed in 0..200 {
            let s = env.reset(seed);
            assert!((-0.6..-0.4).contains(&s[0]));
            assert_eq!(s[1], 0.0);
        }
    }

    #[test]
    fn neutral_velocity_update_is_pure_gravity() {
        let env = MountainCar::default();
        let r = env.step(&[-0.5, 0.0], 1).unwrap();
        let expected = -0.0025 * (-1.5f64).cos();
        assert!((r.state[1] - expected).abs() < 1e-15);
        assert!((r.state[0] - (-0.5 + expected)).abs() < 1e-15);
        assert!(!r.done);
    }

    #[test]
    fn goal_crossing_terminates() {
        let env = MountainCar::default();
        for action in 0..3 {
            let r = env.step(&[0.49, 0.07], action).unwrap();
            assert!(r.done, "action {action} should still cross the goal");
            assert!(r.state[0] >= 0.5);
        }
    }

    #[test]
    fn neutral_policy_never_escapes() {
        let env = MountainCar::default();
        let outcome = run_episode(&env, &ConstantAgent(1), 11, false).unwrap();
        assert_eq!(outcome.steps, 200);
        assert_eq!(outcome.total_reward, -200.0);
    }

    #[test]
    fn state_stays_clamped() {
        let env = MountainCar::default();
        let mut state = env.reset(5);
        for i in 0..500 {
            let r = env.step(&state, (i % 3) as usize).unwrap();
            state = r.state;
            assert!((-1.2..=0.6).contains(&state[0]));
            assert!((-0.07..=0.07).contains(&state[1]));
            if r.done {
                break;
            }
        }
    }
}

//! Pole balancing on a cart, Euler-integrated with the standard constants.
//!
//! State is (cart position, cart velocity, pole angle, pole angular
//! velocity). Two actions push the cart left or right with a fixed force.
//! Every step pays +1; the episode ends when the pole tips past the angle
//! threshold, the cart leaves the track, or 200 steps elapse. A score of 200
//! means the episode was never lost.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{EnvSpec, Environment, StepResult};
use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub masscart: f64,
    pub masspole: f64,
    /// Half the pole length.
    pub length: f64,
    pub force_mag: f64,
    pub tau: f64,
    pub x_threshold: f64,
    pub theta_threshold: f64,
    pub max_steps: usize,
    /// Half-width of the uniform initial-state box.
    pub init_range: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            masscart: 1.0,
            masspole: 0.1,
            length: 0.5,
            force_mag: 10.0,
            tau: 0.02,
            x_threshold: 2.4,
            theta_threshold: 12.0 * std::f64::consts::PI / 180.0,
            max_steps: 200,
            init_range: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CartPole {
    params: CartPoleParams,
    spec: EnvSpec,
}

impl CartPole {
    pub fn new(params: CartPoleParams) -> Result<Self> {
        let spec = EnvSpec {
            state_dim: 4,
            // velocity bounds are clamp ranges for discretization, not
            // physical limits
            state_bounds: vec![
                (-params.x_threshold, params.x_threshold),
                (-3.0, 3.0),
                (-params.theta_threshold, params.theta_threshold),
                (-3.5, 3.5),
            ],
            n_actions: 2,
            control_dim: 1,
            max_steps: params.max_steps,
        };
        spec.validate()?;
        Ok(Self { params, spec })
    }

    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new(CartPoleParams::default()).expect("default parameters are valid")
    }
}

impl Environment for CartPole {
    fn name(&self) -> &'static str {
        "cartpole"
    }

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let r = self.params.init_range;
        (0..4).map(|_| rng.random_range(-r..r)).collect()
    }

    fn step(&self, state: &[f64], action: usize) -> Result<StepResult> {
        if action >= 2 {
            return Err(Error::invalid(format!("cartpole action {action} out of range")));
        }
        let p = &self.params;
        let (x, x_dot, theta, theta_dot) = (state[0], state[1], state[2], state[3]);
        let force = if action == 1 { p.force_mag } else { -p.force_mag };
        let total_mass = p.masscart + p.masspole;
        let polemass_length = p.masspole * p.length;

        let cos_t = theta.cos();
        let sin_t = theta.sin();
        let temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
        let theta_acc = (p.gravity * sin_t - cos_t * temp)
            / (p.length * (4.0 / 3.0 - p.masspole * cos_t * cos_t / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

        let next = vec![
            x + p.tau * x_dot,
            x_dot + p.tau * x_acc,
            theta + p.tau * theta_dot,
            theta_dot + p.tau * theta_acc,
        ];
        let done = next[0].abs() > p.x_threshold || next[2].abs() > p.theta_threshold;
        Ok(StepResult {
            state: next,
            reward: 1.0,
            done,
        })
    }
}

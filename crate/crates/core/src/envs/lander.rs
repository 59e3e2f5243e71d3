//! A planar thruster-landing problem.
//!
//! A point-mass craft with attitude falls toward a landing pad at the
//! origin. State is (x, y, vx, vy, angle, angular velocity); the four
//! actions are no-op, left thruster, main engine and right thruster. The
//! main engine accelerates along the craft's body axis, the side thrusters
//! combine a lateral push with an attitude torque. Touching down on the pad
//! gently and upright earns a bonus, crashing or drifting out of bounds a
//! penalty, and every engine firing burns fuel. A potential-based shaping
//! term rewards progress toward a slow, centered descent.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{EnvSpec, Environment, StepResult};
use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;

pub const LANDER_NOOP: usize = 0;
pub const LANDER_LEFT: usize = 1;
pub const LANDER_MAIN: usize = 2;
pub const LANDER_RIGHT: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LanderParams {
    pub gravity: f64,
    pub main_accel: f64,
    pub side_accel: f64,
    pub side_torque: f64,
    pub dt: f64,
    pub pad_half_width: f64,
    /// Touchdown is soft when |vy| and |angle| stay under these.
    pub soft_vy: f64,
    pub soft_angle: f64,
    pub x_bound: f64,
    pub y_bound: f64,
    pub init_y: f64,
    pub land_bonus: f64,
    pub crash_penalty: f64,
    pub main_fuel_cost: f64,
    pub side_fuel_cost: f64,
    pub max_steps: usize,
}

impl Default for LanderParams {
    fn default() -> Self {
        Self {
            gravity: 1.0,
            main_accel: 2.2,
            side_accel: 1.0,
            side_torque: 0.06,
            dt: 0.02,
            pad_half_width: 2.0,
            soft_vy: 1.5,
            soft_angle: 0.4,
            x_bound: 5.0,
            y_bound: 15.0,
            init_y: 10.0,
            land_bonus: 100.0,
            crash_penalty: 100.0,
            main_fuel_cost: 0.3,
            side_fuel_cost: 0.03,
            max_steps: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lander {
    params: LanderParams,
    spec: EnvSpec,
}

impl Lander {
    pub fn new(params: LanderParams) -> Result<Self> {
        let spec = EnvSpec {
            state_dim: 6,
            state_bounds: vec![
                (-params.x_bound, params.x_bound),
                (0.0, params.y_bound),
                (-3.0, 3.0),
                (-6.0, 2.0),
                (-0.5, 0.5),
                (-1.0, 1.0),
            ],
            n_actions: 4,
            control_dim: 2,
            max_steps: params.max_steps,
        };
        spec.validate()?;
        Ok(Self { params, spec })
    }

    /// Shaping potential: zero at a slow, level hover over the pad center,
    /// increasingly negative with distance, speed and tilt. Scaled so that
    /// descending gently to the pad is worth more than saving fuel by
    /// falling.
    fn potential(&self, s: &[f64]) -> f64 {
        let p = &self.params;
        let dist = ((s[0] / p.x_bound).powi(2) + (s[1] / p.init_y).powi(2)).sqrt();
        let speed = (s[2] * s[2] + s[3] * s[3]).sqrt();
        -100.0 * dist - 10.0 * speed - 30.0 * s[4].abs()
    }
}

impl Default for Lander {
    fn default() -> Self {
        Self::new(LanderParams::default()).expect("default parameters are valid")
    }
}

impl Environment for Lander {
    fn name(&self) -> &'static str {
        "lander"
    }

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        vec![
            rng.random_range(-1.5..1.5),
            self.params.init_y,
            rng.random_range(-0.5..0.5),
            rng.random_range(-1.0..0.0),
            rng.random_range(-0.1..0.1),
            rng.random_range(-0.05..0.05),
        ]
    }

    fn step(&self, state: &[f64], action: usize) -> Result<StepResult> {
        if action >= 4 {
            return Err(Error::invalid(format!("lander action {action} out of range")));
        }
        let p = &self.params;
        let (x, y, vx, vy, angle, omega) = (
            state[0], state[1], state[2], state[3], state[4], state[5],
        );

        let mut ax = 0.0;
        let mut ay = -p.gravity;
        let mut torque = 0.0;
        let mut fuel = 0.0;
        match action {
            LANDER_MAIN => {
                ax += p.main_accel * (-angle.sin());
                ay += p.main_accel * angle.cos();
                fuel = p.main_fuel_cost;
            }
            LANDER_LEFT => {
                ax -= p.side_accel;
                torque = p.side_torque;
                fuel = p.side_fuel_cost;
            }
            LANDER_RIGHT => {
                ax += p.side_accel;
                torque = -p.side_torque;
                fuel = p.side_fuel_cost;
            }
            _ => {}
        }

        let new_vx = vx + ax * p.dt;
        let new_vy = vy + ay * p.dt;
        let new_omega = omega + torque * p.dt;
        let next = vec![
            x + new_vx * p.dt,
            y + new_vy * p.dt,
            new_vx,
            new_vy,
            angle + new_omega * p.dt,
            new_omega,
        ];

        let mut reward = self.potential(&next) - self.potential(state) - fuel;
        let mut done = false;
        if next[1] <= 0.0 {
            done = true;
            let on_pad = next[0].abs() <= p.pad_half_width;
            let soft = next[3].abs() <= p.soft_vy && next[4].abs() <= p.soft_angle;
            reward += if on_pad && soft {
                p.land_bonus
            } else {
                -p.crash_penalty
            };
        } else if next[0].abs() > p.x_bound || next[1] > p.y_bound {
            done = true;
            reward -= p.crash_penalty;
        }
        Ok(StepResult {
            state: next,
            reward,
            done,
        })
    }
}

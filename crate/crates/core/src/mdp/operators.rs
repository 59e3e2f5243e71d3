//! The generalized Bellman backup over policy families, its fixed point and
//! the corresponding sampled Q-learning update.

use crate::error::{Error, Result};
use crate::mdp::{DiscreteMdp, FamilyQTable, Neighborhoods, PolicyFamily};

/// One observed transition: policy `c` was applied in state `x`, paying
/// reward `r` and landing in `next`.
#[derive(Debug, Clone, Copy)]
pub struct TransitionSample {
    pub x: usize,
    pub c: usize,
    pub r: f64,
    pub next: usize,
}

/// The backup operator
/// `(T q)(x, C) = sum_y P(x, C(x), y) [ r(x, C(x), y) + gamma * max_D N q(y, D) ]`
/// where `N` aggregates over the neighborhood of `y` and the max runs over
/// the policy family.
pub struct GeneralizedBellman<'a> {
    mdp: &'a DiscreteMdp,
    family: &'a PolicyFamily,
    nhood: &'a Neighborhoods,
}

/// Converged Q-table plus iteration diagnostics.
#[derive(Debug, Clone)]
pub struct NeighborhoodFixedPoint {
    pub q: FamilyQTable,
    pub iterations: usize,
    pub residual: f64,
}

impl<'a> GeneralizedBellman<'a> {
    pub fn new(
        mdp: &'a DiscreteMdp,
        family: &'a PolicyFamily,
        nhood: &'a Neighborhoods,
    ) -> Result<Self> {
        if family.n_states() != mdp.n_states() || family.n_actions() != mdp.n_actions() {
            return Err(Error::config(format!(
                "policy family shaped for {}x{} does not fit MDP with {} states, {} actions",
                family.n_states(),
                family.n_actions(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        if nhood.n_states() != mdp.n_states() {
            return Err(Error::config("neighborhood map does not cover the state space"));
        }
        Ok(Self { mdp, family, nhood })
    }

    /// Best aggregated continuation value per state: `max_D N q(y, D)`.
    fn continuation(&self, q: &FamilyQTable) -> Vec<f64> {
        (0..self.mdp.n_states())
            .map(|y| {
                (0..self.family.len())
                    .map(|d| self.nhood.apply_unchecked(q, y, d))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    /// Applies the backup once, producing a fresh table.
    pub fn apply(&self, q: &FamilyQTable) -> Result<FamilyQTable> {
        if q.n_states() != self.mdp.n_states() || q.n_policies() != self.family.len() {
            return Err(Error::config("Q-table shape does not match MDP and family"));
        }
        let cont = self.continuation(q);
        let gamma = self.mdp.gamma();
        let mut out = FamilyQTable::zeros(q.n_states(), q.n_policies());
        for x in 0..self.mdp.n_states() {
            for c in 0..self.family.len() {
                let a = self.family.action(c, x);
                let probs = self.mdp.prob_row(x, a);
                let rewards = self.mdp.reward_row(x, a);
                let mut v = 0.0;
                for y in 0..self.mdp.n_states() {
                    let p = probs[y];
                    if p > 0.0 {
                        v += p * (rewards[y] + gamma * cont[y]);
                    }
                }
                out.set(x, c, v);
            }
        }
        Ok(out)
    }

    /// Iterates the backup from the zero table until the sup-norm step falls
    /// below `tol`. Since the operator contracts at rate `gamma < 1`, failure
    /// to converge within `max_iters` signals a defect, not a hard instance.
    pub fn fixed_point(&self, tol: f64, max_iters: usize) -> Result<NeighborhoodFixedPoint> {
        if tol <= 0.0 {
            return Err(Error::invalid(format!("tol must be positive, got {tol}")));
        }
        if max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        let mut q = FamilyQTable::zeros(self.mdp.n_states(), self.family.len());
        let mut residual = f64::INFINITY;
        for iter in 1..=max_iters {
            let next = self.apply(&q)?;
            residual = next.sup_distance(&q);
            q = next;
            if residual < tol {
                return Ok(NeighborhoodFixedPoint {
                    q,
                    iterations: iter,
                    residual,
                });
            }
        }
        Err(Error::NoConvergence {
            iters: max_iters,
            residual,
        })
    }
}

/// Single sampled update of the generalized Q-table:
/// `q(x, c) += alpha * (r + gamma * max_D N q(next, D) - q(x, c))`.
///
/// Only the `(x, c)` entry changes. `alpha` must lie in `[0, 1]`.
pub fn q_learning_step(
    q: &mut FamilyQTable,
    sample: TransitionSample,
    alpha: f64,
    gamma: f64,
    nhood: &Neighborhoods,
) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must be in [0, 1], got {alpha}")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must be in [0, 1), got {gamma}")));
    }
    if sample.x >= q.n_states() || sample.next >= q.n_states() || sample.c >= q.n_policies() {
        return Err(Error::invalid("transition sample outside Q-table"));
    }
    if nhood.n_states() != q.n_states() {
        return Err(Error::config("neighborhood map does not match Q-table"));
    }
    let best_next = (0..q.n_policies())
        .map(|d| nhood.apply_unchecked(q, sample.next, d))
        .fold(f64::NEG_INFINITY, f64::max);
    let old = q.get(sample.x, sample.c);
    q.set(
        sample.x,
        sample.c,
        old + alpha * (sample.r + gamma * best_next - old),
    );
    Ok(())
}

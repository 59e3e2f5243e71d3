//! Ordinary value iteration and exact policy evaluation.
//!
//! These solvers are deliberately independent of the neighborhood machinery:
//! they serve as the reference the generalized operators are checked against.

use crate::error::{Error, Result};
use crate::mdp::DiscreteMdp;

/// Optimal values plus the greedy policy (argmax ties go to the lowest
/// action index).
#[derive(Debug, Clone)]
pub struct ValueIterationResult {
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
}

/// Standard Bellman-optimality iteration from the zero vector.
pub fn value_iteration_classic(
    mdp: &DiscreteMdp,
    tol: f64,
    max_iters: usize,
) -> Result<ValueIterationResult> {
    if tol <= 0.0 {
        return Err(Error::invalid(format!("tol must be positive, got {tol}")));
    }
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let mut v = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iters {
        let mut next = vec![0.0; n];
        for x in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions() {
                let q = backup(mdp, x, a, &v, gamma);
                if q > best {
                    best = q;
                }
            }
            next[x] = best;
        }
        residual = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if residual < tol {
            let policy = greedy_policy(mdp, &v);
            return Ok(ValueIterationResult {
                values: v,
                policy,
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

/// Exact value of a fixed deterministic policy, via iteration of the linear
/// evaluation operator to the requested tolerance.
pub fn policy_evaluation(mdp: &DiscreteMdp, policy: &[usize], tol: f64) -> Result<Vec<f64>> {
    if policy.len() != mdp.n_states() {
        return Err(Error::config("policy length does not match state count"));
    }
    if policy.iter().any(|&a| a >= mdp.n_actions()) {
        return Err(Error::config("policy uses an invalid action index"));
    }
    if tol <= 0.0 {
        return Err(Error::invalid(format!("tol must be positive, got {tol}")));
    }
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let mut v = vec![0.0; n];
    // contraction at rate gamma: bound the iteration count generously
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; n];
        for x in 0..n {
            next[x] = backup(mdp, x, policy[x], &v, gamma);
        }
        let diff = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if diff < tol {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence {
        iters: 1_000_000,
        residual: f64::NAN,
    })
}

#[inline]
fn backup(mdp: &DiscreteMdp, x: usize, a: usize, v: &[f64], gamma: f64) -> f64 {
    let probs = mdp.prob_row(x, a);
    let rewards = mdp.reward_row(x, a);
    let mut q = 0.0;
    for y in 0..v.len() {
        let p = probs[y];
        if p > 0.0 {
            q += p * (rewards[y] + gamma * v[y]);
        }
    }
    q
}

fn greedy_policy(mdp: &DiscreteMdp, v: &[f64]) -> Vec<usize> {
    let gamma = mdp.gamma();
    (0..mdp.n_states())
        .map(|x| {
            let mut best_a = 0;
            let mut best_q = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions() {
                let q = backup(mdp, x, a, v, gamma);
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            best_a
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::random_mdp;

    #[test]
    fn geometric_series_single_state() {
        let mdp = DiscreteMdp::new(1, 1, vec![1.0], vec![1.0], 0.5).unwrap();
        let res = value_iteration_classic(&mdp, 1e-10, 1000).unwrap();
        assert!((res.values[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn gamma_zero_gives_best_expected_reward() {
        let mdp = random_mdp(4, 3, 0.0, 3).unwrap();
        let res = value_iteration_classic(&mdp, 1e-12, 10).unwrap();
        for x in 0..4 {
            let want = (0..3)
                .map(|a| mdp.expected_reward(x, a))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((res.values[x] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_exhaustive_policy_enumeration() {
        // Small enough to evaluate every deterministic policy exactly.
        let mdp = random_mdp(6, 3, 0.85, 2024).unwrap();
        let res = value_iteration_classic(&mdp, 1e-10, 100_000).unwrap();

        let n_policies = 3usize.pow(6);
        let mut best = vec![f64::NEG_INFINITY; 6];
        for idx in 0..n_policies {
            let mut policy = vec![0usize; 6];
            let mut k = idx;
            for slot in policy.iter_mut() {
                *slot = k % 3;
                k /= 3;
            }
            let v = policy_evaluation(&mdp, &policy, 1e-10).unwrap();
            for x in 0..6 {
                if v[x] > best[x] {
                    best[x] = v[x];
                }
            }
        }
        for x in 0..6 {
            assert!(
                (res.values[x] - best[x]).abs() < 1e-6,
                "state {x}: vi={} enumeration={}",
                res.values[x],
                best[x]
            );
        }
    }

    #[test]
    fn greedy_ties_take_lowest_action() {
        // both actions identical: argmax must return action 0
        let p = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let r = vec![1.0; 8];
        let mdp = DiscreteMdp::new(2, 2, p, r, 0.5).unwrap();
        let res = value_iteration_classic(&mdp, 1e-9, 1000).unwrap();
        assert_eq!(res.policy, vec![0, 0]);
    }
}

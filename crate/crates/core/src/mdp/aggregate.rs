//! Reduced MDPs over the regions of a state partition.
//!
//! Two constructions are provided. The average form weights each region's
//! states by a probability vector and keeps one action per policy in the
//! family. The max form expands the action set to (representative state,
//! policy) pairs, so an aggregate action commits to acting from a specific
//! state of the region. Classic value iteration on either reduced MDP
//! reproduces the fixed point of the corresponding neighborhood operator on
//! the original problem.

use crate::error::{Error, Result};
use crate::mdp::{DiscreteMdp, Partition, PolicyFamily, PROB_TOL};

/// How aggregate action indices decode.
#[derive(Debug, Clone)]
pub enum AggregateActions {
    /// Action index `c` is the `c`-th policy of the family.
    Policies,
    /// `pairs[region][action]` is the (state, policy) pair the action plays.
    /// Short regions pad by repeating their last state, which duplicates an
    /// existing action and leaves the optimum untouched.
    StatePolicyPairs { pairs: Vec<Vec<(usize, usize)>> },
}

/// A partition-level MDP plus the decoding of its actions.
#[derive(Debug, Clone)]
pub struct AggregateMdp {
    pub mdp: DiscreteMdp,
    pub partition: Partition,
    pub actions: AggregateActions,
}

/// Uniform region weights: each state gets `1 / |its region|`.
pub fn uniform_zeta(partition: &Partition) -> Vec<f64> {
    let sizes: Vec<usize> = partition.regions().iter().map(Vec::len).collect();
    (0..partition.n_states())
        .map(|x| 1.0 / sizes[partition.region(x)] as f64)
        .collect()
}

fn check_zeta(partition: &Partition, zeta: &[f64]) -> Result<()> {
    if zeta.len() != partition.n_states() {
        return Err(Error::config("zeta must assign a weight to every state"));
    }
    if zeta.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::config("zeta weights must be nonnegative"));
    }
    for (m, region) in partition.regions().iter().enumerate() {
        let sum: f64 = region.iter().map(|&z| zeta[z]).sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::config(format!(
                "zeta over region {m} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(())
}

fn check_shapes(mdp: &DiscreteMdp, partition: &Partition, family: &PolicyFamily) -> Result<()> {
    if partition.n_states() != mdp.n_states() {
        return Err(Error::config("partition does not cover the state space"));
    }
    if family.n_states() != mdp.n_states() || family.n_actions() != mdp.n_actions() {
        return Err(Error::config("policy family does not fit the MDP"));
    }
    Ok(())
}

/// Absorb accumulated rounding so each row passes the strict sum check.
fn renormalize_row(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        let (idx, _) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| {
                if v > acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });
        row[idx] += 1.0 - sum;
    }
}

/// Region-level MDP for the weighted-average operator.
///
/// Transitions pool each region's states by `zeta`; rewards are the matching
/// conditional expectations, taken as zero whenever the pooled transition
/// probability vanishes (the term then never contributes).
pub fn build_aggregate_average(
    mdp: &DiscreteMdp,
    partition: &Partition,
    zeta: &[f64],
    family: &PolicyFamily,
) -> Result<AggregateMdp> {
    check_shapes(mdp, partition, family)?;
    check_zeta(partition, zeta)?;
    let m = partition.n_regions();
    let n_actions = family.len();
    let regions = partition.regions();

    let mut p = vec![0.0; m * n_actions * m];
    let mut r = vec![0.0; m * n_actions * m];
    for (i, region) in regions.iter().enumerate() {
        for c in 0..n_actions {
            let base = (i * n_actions + c) * m;
            let probs = &mut p[base..base + m];
            let mut reward_mass = vec![0.0; m];
            for &z in region {
                let a = family.action(c, z);
                let prow = mdp.prob_row(z, a);
                let rrow = mdp.reward_row(z, a);
                let w = zeta[z];
                if w == 0.0 {
                    continue;
                }
                for y in 0..mdp.n_states() {
                    let mass = w * prow[y];
                    if mass > 0.0 {
                        let j = partition.region(y);
                        probs[j] += mass;
                        reward_mass[j] += mass * rrow[y];
                    }
                }
            }
            for j in 0..m {
                r[base + j] = if probs[j] > 0.0 {
                    reward_mass[j] / probs[j]
                } else {
                    0.0
                };
            }
            renormalize_row(probs);
        }
    }
    Ok(AggregateMdp {
        mdp: DiscreteMdp::new(m, n_actions, p, r, mdp.gamma())?,
        partition: partition.clone(),
        actions: AggregateActions::Policies,
    })
}

/// Region-level MDP for the max operator. Each aggregate action is a
/// (state-in-region, policy) pair.
pub fn build_aggregate_max(
    mdp: &DiscreteMdp,
    partition: &Partition,
    family: &PolicyFamily,
) -> Result<AggregateMdp> {
    check_shapes(mdp, partition, family)?;
    let m = partition.n_regions();
    let regions = partition.regions();
    let max_size = regions.iter().map(Vec::len).max().unwrap_or(0);
    let n_actions = max_size * family.len();

    let mut pairs = vec![Vec::with_capacity(n_actions); m];
    let mut p = vec![0.0; m * n_actions * m];
    let mut r = vec![0.0; m * n_actions * m];
    for (i, region) in regions.iter().enumerate() {
        for slot in 0..max_size {
            let z = region[slot.min(region.len() - 1)];
            for c in 0..family.len() {
                let action = slot * family.len() + c;
                pairs[i].push((z, c));
                let a = family.action(c, z);
                let prow = mdp.prob_row(z, a);
                let rrow = mdp.reward_row(z, a);
                let base = (i * n_actions + action) * m;
                let mut reward_mass = vec![0.0; m];
                for y in 0..mdp.n_states() {
                    if prow[y] > 0.0 {
                        let j = partition.region(y);
                        p[base + j] += prow[y];
                        reward_mass[j] += prow[y] * rrow[y];
                    }
                }
                for j in 0..m {
                    r[base + j] = if p[base + j] > 0.0 {
                        reward_mass[j] / p[base + j]
                    } else {
                        0.0
                    };
                }
                renormalize_row(&mut p[base..base + m]);
            }
        }
    }
    Ok(AggregateMdp {
        mdp: DiscreteMdp::new(m, n_actions, p, r, mdp.gamma())?,
        partition: partition.clone(),
        actions: AggregateActions::StatePolicyPairs { pairs },
    })
}

//! Seeded generators for random MDP instances, policy families and
//! partitions. Used by the theory checks and property tests.

use rand::Rng;

use crate::error::Result;
use crate::mdp::{DiscreteMdp, Partition, PolicyFamily};
use crate::seeding::rng_from_seed;

/// Random dense MDP: transition rows drawn uniform-positive and normalized,
/// rewards uniform in [-1, 1].
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Result<DiscreteMdp> {
    let mut rng = rng_from_seed(seed);
    let len = n_states * n_actions * n_states;
    let mut p = vec![0.0; len];
    let mut r = vec![0.0; len];
    for x in 0..n_states {
        for a in 0..n_actions {
            let base = (x * n_actions + a) * n_states;
            let mut sum = 0.0;
            for y in 0..n_states {
                let w: f64 = rng.random::<f64>() + 1e-3;
                p[base + y] = w;
                sum += w;
            }
            for y in 0..n_states {
                p[base + y] /= sum;
                r[base + y] = rng.random_range(-1.0..1.0);
            }
            // push residual rounding into the largest entry so the row sum
            // is exact enough for validation
            let total: f64 = p[base..base + n_states].iter().sum();
            p[base] += 1.0 - total;
        }
    }
    DiscreteMdp::new(n_states, n_actions, p, r, gamma)
}

/// Random family of `size` distinct-indexed deterministic policies.
pub fn random_family(
    n_states: usize,
    n_actions: usize,
    size: usize,
    seed: u64,
) -> Result<PolicyFamily> {
    let mut rng = rng_from_seed(seed);
    let tables = (0..size)
        .map(|_| (0..n_states).map(|_| rng.random_range(0..n_actions)).collect())
        .collect();
    PolicyFamily::from_tables(tables, n_states, n_actions)
}

/// Random partition of `n_states` states into `n_regions` nonempty regions.
pub fn random_partition(n_states: usize, n_regions: usize, seed: u64) -> Result<Partition> {
    assert!(n_regions <= n_states, "cannot have more regions than states");
    let mut rng = rng_from_seed(seed);
    // guarantee coverage: first n_regions states pinned, rest uniform
    let mut region_of: Vec<usize> = (0..n_states)
        .map(|x| if x < n_regions { x } else { rng.random_range(0..n_regions) })
        .collect();
    // shuffle state order so the pinned prefix is not special
    for i in (1..n_states).rev() {
        let j = rng.random_range(0..=i);
        region_of.swap(i, j);
    }
    Partition::new(region_of, n_regions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        let a = random_mdp(5, 3, 0.9, 123).unwrap();
        let b = random_mdp(5, 3, 0.9, 123).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = random_mdp(5, 3, 0.9, 124).unwrap();
        assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
    }

    #[test]
    fn partitions_cover_all_regions() {
        for seed in 0..50 {
            let p = random_partition(7, 3, seed).unwrap();
            assert_eq!(p.n_regions(), 3);
            assert_eq!(p.regions().iter().map(Vec::len).sum::<usize>(), 7);
        }
    }
}

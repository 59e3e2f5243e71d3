//! Property tests for the operator algebra and the controller encoding.

use proptest::collection::vec;
use proptest::prelude::*;

use cbrl_core::controllers::{ControllerSpec, Quantizer};
use cbrl_core::envs::EnvKind;
use cbrl_core::mdp::{
    policy_evaluation, random_family, random_mdp, random_partition, uniform_zeta,
    value_iteration_classic, FamilyQTable, GeneralizedBellman, NeighborhoodOp, Neighborhoods,
    PolicyFamily,
};

fn table_from(values: Vec<f64>, n_states: usize, n_policies: usize) -> FamilyQTable {
    FamilyQTable::from_values(values, n_states, n_policies).expect("finite values")
}

proptest! {
    /// One backup application shrinks sup-norm distances by at least gamma,
    /// for every operator kind.
    #[test]
    fn backup_contracts(
        seed in 0u64..10_000,
        n in 2usize..6,
        a in 2usize..4,
        gamma in 0.1f64..0.99,
        kind in 0usize..3,
        q1 in vec(-5.0f64..5.0, 36),
        q2 in vec(-5.0f64..5.0, 36),
    ) {
        let mdp = random_mdp(n, a, gamma, seed).unwrap();
        let family = random_family(n, a, 3, seed ^ 1).unwrap();
        let part = random_partition(n, 1 + (seed as usize % n), seed ^ 2).unwrap();
        let nhood = match kind {
            0 => Neighborhoods::from_partition(&part, NeighborhoodOp::Max).unwrap(),
            1 => Neighborhoods::from_partition(&part, NeighborhoodOp::Min).unwrap(),
            _ => Neighborhoods::from_partition_average(&part, &uniform_zeta(&part)).unwrap(),
        };
        let op = GeneralizedBellman::new(&mdp, &family, &nhood).unwrap();
        let q1 = table_from(q1[..n * 3].to_vec(), n, 3);
        let q2 = table_from(q2[..n * 3].to_vec(), n, 3);
        let lhs = op.apply(&q1).unwrap().sup_distance(&op.apply(&q2).unwrap());
        let rhs = gamma * q1.sup_distance(&q2);
        prop_assert!(lhs <= rhs + 1e-12, "lhs={lhs} rhs={rhs}");
    }

    /// Aggregation over a neighborhood never expands distances.
    #[test]
    fn aggregation_nonexpansive(
        seed in 0u64..10_000,
        n in 2usize..7,
        kind in 0usize..3,
        q1 in vec(-5.0f64..5.0, 42),
        q2 in vec(-5.0f64..5.0, 42),
    ) {
        let m = 1 + (seed as usize % n);
        let part = random_partition(n, m, seed).unwrap();
        let nhood = match kind {
            0 => Neighborhoods::from_partition(&part, NeighborhoodOp::Max).unwrap(),
            1 => Neighborhoods::from_partition(&part, NeighborhoodOp::Min).unwrap(),
            _ => Neighborhoods::from_partition_average(&part, &uniform_zeta(&part)).unwrap(),
        };
        let q1 = table_from(q1[..n * 6].to_vec(), n, 6);
        let q2 = table_from(q2[..n * 6].to_vec(), n, 6);
        let bound = q1.sup_distance(&q2);
        for x in 0..n {
            for c in 0..6 {
                let d = (nhood.apply(&q1, x, c).unwrap() - nhood.apply(&q2, x, c).unwrap()).abs();
                prop_assert!(d <= bound + 1e-12);
            }
        }
    }

    /// States sharing a neighborhood aggregate to bitwise-equal values.
    #[test]
    fn shared_neighborhoods_agree_exactly(
        seed in 0u64..10_000,
        n in 2usize..7,
        q in vec(-5.0f64..5.0, 42),
    ) {
        let m = 1 + (seed as usize % n);
        let part = random_partition(n, m, seed).unwrap();
        let q = table_from(q[..n * 6].to_vec(), n, 6);
        for nhood in [
            Neighborhoods::from_partition(&part, NeighborhoodOp::Max).unwrap(),
            Neighborhoods::from_partition(&part, NeighborhoodOp::Min).unwrap(),
            Neighborhoods::from_partition_average(&part, &uniform_zeta(&part)).unwrap(),
        ] {
            for region in part.regions() {
                for pair in region.windows(2) {
                    for c in 0..6 {
                        let a = nhood.apply(&q, pair[0], c).unwrap();
                        let b = nhood.apply(&q, pair[1], c).unwrap();
                        prop_assert_eq!(a.to_bits(), b.to_bits());
                    }
                }
            }
        }
    }

    /// Every control vector quantizes to exactly one valid action.
    #[test]
    fn quantizers_are_total(
        u0 in -1e12f64..1e12,
        u1 in -1e12f64..1e12,
        tau in 0.0f64..2.0,
    ) {
        for (quantizer, n_actions) in [
            (Quantizer::SignBinary, 2usize),
            (Quantizer::TriThreshold { tau }, 3),
        ] {
            let action = quantizer.quantize(&[u0]).unwrap();
            prop_assert!(action < n_actions);
        }
        let lander = Quantizer::LanderPriority { tau_vertical: tau, tau_lateral: tau };
        let action = lander.quantize(&[u0, u1]).unwrap();
        prop_assert!(action < 4);
    }

    /// Decode is the exact inverse of encode on the free parameters, for a
    /// spec with ties and features in play.
    #[test]
    fn genome_roundtrip(genome in vec(-10.0f64..10.0, 28)) {
        let spec = ControllerSpec::lander_pwl_symmetric_m4();
        let genome = genome[..spec.genome_length()].to_vec();
        let full = spec.decode(&genome).unwrap();
        prop_assert_eq!(spec.encode(&full).unwrap(), genome);
    }

    /// Controls are affine within a partition region: the midpoint of two
    /// same-region states maps to the midpoint of their controls.
    #[test]
    fn piecewise_affine_within_regions(
        genome in vec(-3.0f64..3.0, 14),
        base in vec(0.1f64..2.0, 6),
        delta in vec(-0.04f64..0.04, 6),
    ) {
        let spec = ControllerSpec::lander_pwl_symmetric_m2();
        let a: Vec<f64> = base.clone();
        let b: Vec<f64> = base.iter().zip(&delta).map(|(x, d)| x + d).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        // all positive in dim 0, so all three share a region
        prop_assert_eq!(spec.partition.region_of(&a), spec.partition.region_of(&b));
        let ua = spec.act_continuous(&genome, &a).unwrap();
        let ub = spec.act_continuous(&genome, &b).unwrap();
        let um = spec.act_continuous(&genome, &mid).unwrap();
        for d in 0..2 {
            prop_assert!((um[d] - 0.5 * (ua[d] + ub[d])).abs() < 1e-9);
        }
    }

    /// Environment steps are pure: stepping the same state twice gives the
    /// same result.
    #[test]
    fn env_steps_are_pure(seed in 0u64..5_000, action in 0usize..2) {
        for kind in [EnvKind::CartPole, EnvKind::MountainCar, EnvKind::Lander] {
            let env = kind.build();
            let state = env.reset(seed);
            let a = env.step(&state, action).unwrap();
            let b = env.step(&state, action).unwrap();
            prop_assert_eq!(a.state, b.state);
            prop_assert_eq!(a.reward.to_bits(), b.reward.to_bits());
            prop_assert_eq!(a.done, b.done);
        }
    }
}

/// With singleton neighborhoods, the fixed point over a product family
/// (independent action menus per state) equals the best exact policy
/// evaluation in the family: switching between members buys nothing because
/// the family already contains every recombination.
#[test]
fn product_family_fixed_point_equals_best_member() {
    for seed in 0..20u64 {
        let n = 2 + (seed as usize % 3);
        let a = 2 + (seed as usize % 2);
        let mdp = random_mdp(n, a, 0.85, seed).unwrap();
        // menu of allowed actions per state, at least one each
        let mut menus: Vec<Vec<usize>> = Vec::new();
        for x in 0..n {
            let mut menu: Vec<usize> = (0..a).filter(|&k| (seed >> (x + k)) & 1 == 0).collect();
            if menu.is_empty() {
                menu.push(0);
            }
            menus.push(menu);
        }
        // product family: every combination of menu choices
        let mut tables = vec![Vec::new()];
        for menu in &menus {
            tables = tables
                .into_iter()
                .flat_map(|prefix: Vec<usize>| {
                    menu.iter().map(move |&choice| {
                        let mut t = prefix.clone();
                        t.push(choice);
                        t
                    })
                })
                .collect();
        }
        let family = PolicyFamily::from_tables(tables, n, a).unwrap();
        let nhood = Neighborhoods::singleton(n, NeighborhoodOp::Max);
        let fp = GeneralizedBellman::new(&mdp, &family, &nhood)
            .unwrap()
            .fixed_point(1e-11, 1_000_000)
            .unwrap();
        let v_star = fp.q.state_values();

        let mut best = vec![f64::NEG_INFINITY; n];
        for c in 0..family.len() {
            let v = policy_evaluation(&mdp, family.table(c), 1e-11).unwrap();
            for x in 0..n {
                best[x] = best[x].max(v[x]);
            }
        }
        for x in 0..n {
            assert!(
                (v_star[x] - best[x]).abs() < 1e-6,
                "seed {seed}, state {x}: fixed point {} vs best member {}",
                v_star[x],
                best[x]
            );
        }
    }
}

/// A singleton family's fixed point is exactly that policy's value.
#[test]
fn singleton_family_fixed_point_is_policy_value() {
    for seed in 0..20u64 {
        let mdp = random_mdp(4, 3, 0.9, seed).unwrap();
        let family = random_family(4, 3, 1, seed ^ 9).unwrap();
        let nhood = Neighborhoods::singleton(4, NeighborhoodOp::Max);
        let fp = GeneralizedBellman::new(&mdp, &family, &nhood)
            .unwrap()
            .fixed_point(1e-11, 1_000_000)
            .unwrap();
        let v = policy_evaluation(&mdp, family.table(0), 1e-11).unwrap();
        for x in 0..4 {
            assert!((fp.q.get(x, 0) - v[x]).abs() < 1e-6);
        }
    }
}

/// The paper-facing corner: the full deterministic family recovers the
/// classical optimum whatever the tie-breaks.
#[test]
fn full_family_matches_classic_on_fixed_instances() {
    for seed in [3u64, 1143, 777_777] {
        let mdp = random_mdp(5, 3, 0.92, seed).unwrap();
        let family = PolicyFamily::all_deterministic(5, 3).unwrap();
        let nhood = Neighborhoods::singleton(5, NeighborhoodOp::Max);
        let fp = GeneralizedBellman::new(&mdp, &family, &nhood)
            .unwrap()
            .fixed_point(1e-10, 1_000_000)
            .unwrap();
        let vi = value_iteration_classic(&mdp, 1e-10, 1_000_000).unwrap();
        let v = fp.q.state_values();
        for x in 0..5 {
            assert!((v[x] - vi.values[x]).abs() < 1e-6);
        }
    }
}

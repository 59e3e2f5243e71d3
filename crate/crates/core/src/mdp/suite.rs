//! Randomized verification suite for the generalized-operator machinery.
//!
//! Each check draws seeded random instances, measures the worst residual or
//! margin against the property it verifies, and reports pass/fail. The CLI
//! `mdp-check` subcommand prints one line per check; the acceptance tests
//! assert on the same results.

use rand::Rng;

use crate::error::Result;
use crate::mdp::{
    build_aggregate_average, build_aggregate_max, q_learning_step, random_family, random_mdp,
    random_partition, uniform_zeta, value_iteration_classic, FamilyQTable, GeneralizedBellman,
    NeighborhoodOp, Neighborhoods, Partition, PolicyFamily, TransitionSample,
};
use crate::seeding::{derive_seed, rng_from_seed};

/// Outcome of one randomized check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed residual (distance checks) or margin defect (bound
    /// checks); see `detail` for the direction.
    pub worst: f64,
    pub instances: usize,
    pub detail: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "{} {:<28} instances={:<5} worst={:>12.3e}  ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.instances,
            self.worst,
            self.detail
        )
    }
}

/// Instance counts and the master seed for the whole suite.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    pub contraction_instances: usize,
    pub singleton_instances: usize,
    pub upper_bound_instances: usize,
    pub aggregate_instances: usize,
    pub q_learning_instances: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            contraction_instances: 1000,
            singleton_instances: 100,
            upper_bound_instances: 100,
            aggregate_instances: 50,
            q_learning_instances: 5,
        }
    }
}

/// Runs every check. All results are reported even if an early one fails.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    Ok(vec![
        check_contraction(cfg)?,
        check_operator_bound(cfg)?,
        check_neighborhood_invariance(cfg)?,
        check_singleton_matches_classic(cfg)?,
        check_max_upper_bound(cfg)?,
        check_aggregate(cfg, NeighborhoodOp::Average)?,
        check_aggregate(cfg, NeighborhoodOp::Max)?,
        check_sampled_q_convergence(cfg)?,
    ])
}

fn op_for(i: usize) -> NeighborhoodOp {
    match i % 3 {
        0 => NeighborhoodOp::Max,
        1 => NeighborhoodOp::Min,
        _ => NeighborhoodOp::Average,
    }
}

/// Random neighborhoods: every state keeps itself and joins a random subset
/// of the others; the average kind gets random normalized weights.
fn random_neighborhoods(
    n_states: usize,
    op: NeighborhoodOp,
    seed: u64,
) -> Result<Neighborhoods> {
    let mut rng = rng_from_seed(seed);
    let mut sets = Vec::with_capacity(n_states);
    for x in 0..n_states {
        let mut set = vec![x];
        for y in 0..n_states {
            if y != x && rng.random::<f64>() < 0.4 {
                set.push(y);
            }
        }
        set.sort_unstable();
        sets.push(set);
    }
    let weights = match op {
        NeighborhoodOp::Average => Some(
            sets.iter()
                .map(|set| {
                    let raw: Vec<f64> =
                        set.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
                    let sum: f64 = raw.iter().sum();
                    let mut w: Vec<f64> = raw.iter().map(|v| v / sum).collect();
                    let total: f64 = w.iter().sum();
                    w[0] += 1.0 - total;
                    w
                })
                .collect(),
        ),
        _ => None,
    };
    Neighborhoods::new(sets, op, weights)
}

fn random_table(n_states: usize, n_policies: usize, rng: &mut impl Rng) -> FamilyQTable {
    let values = (0..n_states * n_policies)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    FamilyQTable::from_values(values, n_states, n_policies).expect("finite by construction")
}

/// `|T q1 - T q2| <= gamma |q1 - q2|` in sup norm, for all operator kinds.
pub fn check_contraction(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut worst = f64::INFINITY;
    let mut failures = 0usize;
    for i in 0..cfg.contraction_instances {
        let seed = derive_seed(cfg.seed, "contraction", &[i as u64]);
        let mut rng = rng_from_seed(seed);
        let n = rng.random_range(2..=5);
        let a = rng.random_range(2..=3);
        let gamma = rng.random_range(0.3..0.97);
        let fam_size = rng.random_range(2..=4);
        let mdp = random_mdp(n, a, gamma, derive_seed(seed, "mdp", &[]))?;
        let family = random_family(n, a, fam_size, derive_seed(seed, "family", &[]))?;
        let nhood = random_neighborhoods(n, op_for(i), derive_seed(seed, "nu", &[]))?;
        let op = GeneralizedBellman::new(&mdp, &family, &nhood)?;

        let q1 = random_table(n, fam_size, &mut rng);
        let q2 = random_table(n, fam_size, &mut rng);
        let lhs = op.apply(&q1)?.sup_distance(&op.apply(&q2)?);
        let rhs = gamma * q1.sup_distance(&q2);
        let margin = rhs - lhs;
        worst = worst.min(margin);
        if margin < -1e-12 {
            failures += 1;
        }
    }
    Ok(CheckResult {
        name: "contraction-bound",
        passed: failures == 0,
        worst,
        instances: cfg.contraction_instances,
        detail: format!("min of gamma*|q1-q2| - |Tq1-Tq2|, {failures} violations"),
    })
}

/// The aggregation itself is nonexpansive: `|N q1 - N q2| <= |q1 - q2|`.
pub fn check_operator_bound(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut worst = f64::INFINITY;
    let mut failures = 0usize;
    for i in 0..cfg.contraction_instances {
        let seed = derive_seed(cfg.seed, "operator-bound", &[i as u64]);
        let mut rng = rng_from_seed(seed);
        let n = rng.random_range(2..=6);
        let fam_size = rng.random_range(1..=4);
        let nhood = random_neighborhoods(n, op_for(i), derive_seed(seed, "nu", &[]))?;
        let q1 = random_table(n, fam_size, &mut rng);
        let q2 = random_table(n, fam_size, &mut rng);
        let mut lhs = 0.0f64;
        for x in 0..n {
            for c in 0..fam_size {
                lhs = lhs.max((nhood.apply(&q1, x, c)? - nhood.apply(&q2, x, c)?).abs());
            }
        }
        let margin = q1.sup_distance(&q2) - lhs;
        worst = worst.min(margin);
        if margin < -1e-12 {
            failures += 1;
        }
    }
    Ok(CheckResult {
        name: "aggregation-nonexpansive",
        passed: failures == 0,
        worst,
        instances: cfg.contraction_instances,
        detail: format!("min of |q1-q2| - |Nq1-Nq2|, {failures} violations"),
    })
}

/// States sharing a neighborhood produce bitwise-identical aggregated values.
pub fn check_neighborhood_invariance(cfg: &SuiteConfig) -> Result<CheckResult> {
    let instances = cfg.singleton_instances;
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for i in 0..instances {
        let seed = derive_seed(cfg.seed, "nu-invariance", &[i as u64]);
        let mut rng = rng_from_seed(seed);
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..=n);
        let fam_size = rng.random_range(1..=4);
        let part = random_partition(n, m, derive_seed(seed, "part", &[]))?;
        let q = random_table(n, fam_size, &mut rng);
        for op in [NeighborhoodOp::Max, NeighborhoodOp::Min] {
            let nhood = Neighborhoods::from_partition(&part, op)?;
            worst = worst.max(invariance_defect(&nhood, &part, &q)?);
        }
        let nhood = Neighborhoods::from_partition_average(&part, &uniform_zeta(&part))?;
        worst = worst.max(invariance_defect(&nhood, &part, &q)?);
        if worst != 0.0 {
            failures += 1;
        }
    }
    Ok(CheckResult {
        name: "neighborhood-invariance",
        passed: failures == 0,
        worst,
        instances,
        detail: "max |N q(x,.) - N q(y,.)| over same-region pairs, must be exactly 0".into(),
    })
}

fn invariance_defect(nhood: &Neighborhoods, part: &Partition, q: &FamilyQTable) -> Result<f64> {
    let mut defect = 0.0f64;
    for region in part.regions() {
        let x0 = region[0];
        for &x in &region[1..] {
            for c in 0..q.n_policies() {
                defect = defect.max((nhood.apply(q, x0, c)? - nhood.apply(q, x, c)?).abs());
            }
        }
    }
    Ok(defect)
}

/// With singleton neighborhoods and the full deterministic family, the best
/// per-state fixed-point value equals classic value iteration.
pub fn check_singleton_matches_classic(cfg: &SuiteConfig) -> Result<CheckResult> {
    let tol = 1e-9;
    let band = 1e-6;
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for i in 0..cfg.singleton_instances {
        let seed = derive_seed(cfg.seed, "singleton-classic", &[i as u64]);
        let mut rng = rng_from_seed(seed);
        let n = rng.random_range(2..=6);
        let a = rng.random_range(2..=3);
        let gamma = rng.random_range(0.5..0.95);
        let mdp = random_mdp(n, a, gamma, derive_seed(seed, "mdp", &[]))?;
        let family = PolicyFamily::all_deterministic(n, a)?;
        let nhood = Neighborhoods::singleton(n, NeighborhoodOp::Max);
        let fp = GeneralizedBellman::new(&mdp, &family, &nhood)?.fixed_point(tol, 1_000_000)?;
        let vi = value_iteration_classic(&mdp, tol, 1_000_000)?;
        let v = fp.q.state_values();
        for x in 0..n {
            let err = (v[x] - vi.values[x]).abs();
            worst = worst.max(err);
            if err > band {
                failures += 1;
            }
        }
    }
    Ok(CheckResult {
        name: "singleton-matches-classic",
        passed: failures == 0,
        worst,
        instances: cfg.singleton_instances,
        detail: format!("max |V_family - V_classic|, band {band:.0e}"),
    })
}

/// With the max operator over any partition and the full family, the fixed
/// point dominates the classic optimal values componentwise.
pub fn check_max_upper_bound(cfg: &SuiteConfig) -> Result<CheckResult> {
    let tol = 1e-9;
    let mut worst = f64::INFINITY;
    let mut failures = 0usize;
    for i in 0..cfg.upper_bound_instances {
        let seed = derive_seed(cfg.seed, "max-upper-bound", &[i as u64]);
        let mut rng = rng_from_seed(seed);
        let n = rng.random_range(2..=5);
        let a = rng.random_range(2..=3);
        let gamma = rng.random_range(0.5..0.9);
        let m = rng.random_range(1..=n);
        let mdp = random_mdp(n, a, gamma, derive_seed(seed, "mdp", &[]))?;
        let family = PolicyFamily::all_deterministic(n, a)?;
        let part = random_partition(n, m, derive_seed(seed, "part", &[]))?;
        let nhood = Neighborhoods::from_partition(&part, NeighborhoodOp::Max)?;

        // solve both sides to true error <= tol so the comparison band is
        // meaningful
        let step_tol = tol * (1.0 - gamma) / gamma.max(0.1);
        let fp = GeneralizedBellman::new(&mdp, &family, &nhood)?.fixed_point(step_tol, 2_000_000)?;
        let vi = value_iteration_classic(&mdp, step_tol, 2_000_000)?;
        for x in 0..n {
            let v_star = (0..family.len())
                .map(|c| nhood.apply(&fp.q, x, c))
                .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))?;
            let margin = v_star - vi.values[x];
            worst = worst.min(margin);
            if margin < -2.0 * tol {
                failures += 1;
            }
        }
    }
    Ok(CheckResult {
        name: "max-operator-upper-bound",
        passed: failures == 0,
        worst,
        instances: cfg.upper_bound_instances,
        detail: "min of V_max - V_classic, must exceed -2e-9".into(),
    })
}

/// Value iteration on the constructed region-level MDP reproduces the
/// partitioned fixed point.
pub fn check_aggregate(cfg: &SuiteConfig, op: NeighborhoodOp) -> Result<CheckResult> {
    assert!(op != NeighborhoodOp::Min, "no aggregate construction for min");
    let band = 1e-6;
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    let tag = match op {
        NeighborhoodOp::Average => "aggregate-average",
        _ => "aggregate-max",
    };
    for i in 0..cfg.aggregate_instances {
        let seed = derive_seed(cfg.seed, tag, &[i as u64]);
        let mut rng = rng_from_seed(seed);
        let n = rng.random_range(3..=6);
        let a = rng.random_range(2..=3);
        let gamma = rng.random_range(0.5..0.9);
        let m = rng.random_range(1..=n);
        let fam_size = rng.random_range(2..=5);
        let mdp = random_mdp(n, a, gamma, derive_seed(seed, "mdp", &[]))?;
        let family = random_family(n, a, fam_size, derive_seed(seed, "family", &[]))?;
        let part = random_partition(n, m, derive_seed(seed, "part", &[]))?;

        let (agg, nhood) = match op {
            NeighborhoodOp::Average => {
                let zeta = uniform_zeta(&part);
                (
                    build_aggregate_average(&mdp, &part, &zeta, &family)?,
                    Neighborhoods::from_partition_average(&part, &zeta)?,
                )
            }
            _ => (
                build_aggregate_max(&mdp, &part, &family)?,
                Neighborhoods::from_partition(&part, NeighborhoodOp::Max)?,
            ),
        };
        let step_tol = 1e-10 * (1.0 - gamma) / gamma.max(0.1);
        let vi = value_iteration_classic(&agg.mdp, step_tol, 2_000_000)?;
        let fp = GeneralizedBellman::new(&mdp, &family, &nhood)?.fixed_point(step_tol, 2_000_000)?;
        for x in 0..n {
            let v_star = (0..family.len())
                .map(|c| nhood.apply(&fp.q, x, c))
                .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))?;
            let err = (v_star - vi.values[part.region(x)]).abs();
            worst = worst.max(err);
            if err > band {
                failures += 1;
            }
        }
    }
    Ok(CheckResult {
        name: match op {
            NeighborhoodOp::Average => "aggregate-average-equivalence",
            _ => "aggregate-max-equivalence",
        },
        passed: failures == 0,
        worst,
        instances: cfg.aggregate_instances,
        detail: format!("max |V_partitioned - V_aggregate|, band {band:.0e}"),
    })
}

fn sample_categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let mut u: f64 = rng.random();
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probs.len() - 1
}

/// Sampled Q-learning with visit-count step sizes and exhaustive cyclic
/// sampling converges to the operator fixed point.
pub fn check_sampled_q_convergence(cfg: &SuiteConfig) -> Result<CheckResult> {
    let band = 1e-2;
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for i in 0..cfg.q_learning_instances {
        let seed = derive_seed(cfg.seed, "sampled-q", &[i as u64]);
        let n = 3;
        let a = 2;
        let gamma = 0.45;
        let mdp = random_mdp(n, a, gamma, derive_seed(seed, "mdp", &[]))?;
        let fam_size = 3 + (i % 2); // 3 or 4 policies, never more
        let family = random_family(n, a, fam_size, derive_seed(seed, "family", &[]))?;
        // alternate between the degenerate map and a genuine 2-region one
        let nhood = if i % 2 == 0 {
            Neighborhoods::singleton(n, NeighborhoodOp::Max)
        } else {
            let part = random_partition(n, 2, derive_seed(seed, "part", &[]))?;
            Neighborhoods::from_partition(&part, NeighborhoodOp::Max)?
        };
        let fp = GeneralizedBellman::new(&mdp, &family, &nhood)?.fixed_point(1e-10, 1_000_000)?;

        let mut q = FamilyQTable::zeros(n, family.len());
        let mut visits = vec![0u64; n * family.len()];
        let mut rng = rng_from_seed(derive_seed(seed, "samples", &[]));
        let sweeps = 400_000;
        for sweep in 0..sweeps {
            for x in 0..n {
                for c in 0..family.len() {
                    let action = family.action(c, x);
                    let next = sample_categorical(&mut rng, mdp.prob_row(x, action));
                    let r = mdp.reward(x, action, next);
                    let idx = x * family.len() + c;
                    let alpha = 1.0 / (1.0 + visits[idx] as f64);
                    visits[idx] += 1;
                    q_learning_step(&mut q, TransitionSample { x, c, r, next }, alpha, gamma, &nhood)?;
                }
            }
            if sweep % 1000 == 999 && q.sup_distance(&fp.q) < band / 2.0 {
                break;
            }
        }
        let dist = q.sup_distance(&fp.q);
        worst = worst.max(dist);
        if dist >= band {
            failures += 1;
        }
    }
    Ok(CheckResult {
        name: "sampled-q-convergence",
        passed: failures == 0,
        worst,
        instances: cfg.q_learning_instances,
        detail: format!("max |q_t - q*| after cyclic sampling, band {band:.0e}"),
    })
}

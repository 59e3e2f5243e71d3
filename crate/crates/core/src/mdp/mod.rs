//! Finite MDPs with policy families and neighborhood-aggregated Q-values.
//!
//! The classical Bellman machinery works on Q(state, action). Here the
//! second index ranges over a finite family of whole policies instead, and a
//! per-state neighborhood operator (max, min or weighted average) aggregates
//! Q-values over nearby states before the sup over the family is taken.
//! `operators` holds the generalized backup, its fixed point and the sampled
//! Q-learning update; `aggregate` builds the reduced MDPs induced by a state
//! partition; `classic` is the ordinary value-iteration solver used as an
//! independent reference throughout the tests.

mod aggregate;
mod classic;
mod operators;
mod random;
pub mod suite;

pub use aggregate::{build_aggregate_average, build_aggregate_max, uniform_zeta, AggregateActions, AggregateMdp};
pub use classic::{policy_evaluation, value_iteration_classic, ValueIterationResult};
pub use operators::{q_learning_step, GeneralizedBellman, NeighborhoodFixedPoint, TransitionSample};
pub use random::{random_family, random_mdp, random_partition};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "probabilities sum to one" checks.
pub const PROB_TOL: f64 = 1e-12;

/// A finite discounted MDP with dense transition and reward tensors.
///
/// `p` and `r` are row-major over (state, action, next_state).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MdpData", into = "MdpData")]
pub struct DiscreteMdp {
    n_states: usize,
    n_actions: usize,
    p: Vec<f64>,
    r: Vec<f64>,
    gamma: f64,
}

/// Raw serialized form: flattened tensors, validated on the way in.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MdpData {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    p: Vec<f64>,
    r: Vec<f64>,
}

impl TryFrom<MdpData> for DiscreteMdp {
    type Error = Error;

    fn try_from(d: MdpData) -> Result<Self> {
        DiscreteMdp::new(d.n_states, d.n_actions, d.p, d.r, d.gamma)
    }
}

impl From<DiscreteMdp> for MdpData {
    fn from(m: DiscreteMdp) -> Self {
        MdpData {
            n_states: m.n_states,
            n_actions: m.n_actions,
            gamma: m.gamma,
            p: m.p,
            r: m.r,
        }
    }
}

impl DiscreteMdp {
    /// Builds and validates an MDP. Each transition row must sum to one
    /// within [`PROB_TOL`], rewards must be finite and `gamma` must lie in
    /// `[0, 1)`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        p: Vec<f64>,
        r: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config("MDP needs at least one state and one action"));
        }
        let len = n_states * n_actions * n_states;
        if p.len() != len || r.len() != len {
            return Err(Error::config(format!(
                "tensor length mismatch: expected {len}, got p={}, r={}",
                p.len(),
                r.len()
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::config(format!("gamma must be in [0, 1), got {gamma}")));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("rewards must be finite"));
        }
        for x in 0..n_states {
            for a in 0..n_actions {
                let row = &p[(x * n_actions + a) * n_states..(x * n_actions + a + 1) * n_states];
                if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::config(format!(
                        "transition probabilities out of [0,1] at state {x}, action {a}"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(Error::config(format!(
                        "transition row (state {x}, action {a}) sums to {sum}, expected 1"
                    )));
                }
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            p,
            r,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.p[(state * self.n_actions + action) * self.n_states + next]
    }

    #[inline]
    pub fn reward(&self, state: usize, action: usize, next: usize) -> f64 {
        self.r[(state * self.n_actions + action) * self.n_states + next]
    }

    /// Transition row for a (state, action) pair.
    #[inline]
    pub fn prob_row(&self, state: usize, action: usize) -> &[f64] {
        let base = (state * self.n_actions + action) * self.n_states;
        &self.p[base..base + self.n_states]
    }

    #[inline]
    pub fn reward_row(&self, state: usize, action: usize) -> &[f64] {
        let base = (state * self.n_actions + action) * self.n_states;
        &self.r[base..base + self.n_states]
    }

    /// Expected one-step reward for a (state, action) pair.
    pub fn expected_reward(&self, state: usize, action: usize) -> f64 {
        self.prob_row(state, action)
            .iter()
            .zip(self.reward_row(state, action))
            .map(|(p, r)| p * r)
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A finite, ordered family of deterministic policies.
///
/// Each policy is a full action table over the state space; its position in
/// the list is its stable index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyFamily {
    tables: Vec<Vec<usize>>,
    n_states: usize,
    n_actions: usize,
}

impl PolicyFamily {
    pub fn from_tables(tables: Vec<Vec<usize>>, n_states: usize, n_actions: usize) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::config("policy family must be non-empty"));
        }
        for (i, t) in tables.iter().enumerate() {
            if t.len() != n_states {
                return Err(Error::config(format!(
                    "policy {i} has {} entries, expected {n_states}",
                    t.len()
                )));
            }
            if t.iter().any(|&a| a >= n_actions) {
                return Err(Error::config(format!("policy {i} uses an invalid action index")));
            }
        }
        Ok(Self {
            tables,
            n_states,
            n_actions,
        })
    }

    /// Every deterministic policy, enumerated in lexicographic order
    /// (action of state 0 varies slowest). There are `n_actions^n_states`.
    pub fn all_deterministic(n_states: usize, n_actions: usize) -> Result<Self> {
        let count = n_actions
            .checked_pow(n_states as u32)
            .ok_or_else(|| Error::config("full policy family too large to enumerate"))?;
        let mut tables = Vec::with_capacity(count);
        let mut current = vec![0usize; n_states];
        loop {
            tables.push(current.clone());
            // odometer increment, last state fastest
            let mut pos = n_states;
            loop {
                if pos == 0 {
                    return Self::from_tables(tables, n_states, n_actions);
                }
                pos -= 1;
                current[pos] += 1;
                if current[pos] < n_actions {
                    break;
                }
                current[pos] = 0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Action the `policy`-th member takes in `state`.
    #[inline]
    pub fn action(&self, policy: usize, state: usize) -> usize {
        self.tables[policy][state]
    }

    pub fn table(&self, policy: usize) -> &[usize] {
        &self.tables[policy]
    }
}

/// Which aggregation a neighborhood applies to Q-values over its states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborhoodOp {
    Max,
    Min,
    Average,
}

/// Per-state neighborhoods plus the aggregation operator applied over them.
///
/// Every state belongs to its own neighborhood. For the average operator each
/// state carries a probability vector over its neighborhood.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Neighborhoods {
    sets: Vec<Vec<usize>>,
    op: NeighborhoodOp,
    /// Aligned with `sets`; present only for [`NeighborhoodOp::Average`].
    weights: Option<Vec<Vec<f64>>>,
}

impl Neighborhoods {
    pub fn new(
        sets: Vec<Vec<usize>>,
        op: NeighborhoodOp,
        weights: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n_states = sets.len();
        if n_states == 0 {
            return Err(Error::config("neighborhood map must cover at least one state"));
        }
        for (x, set) in sets.iter().enumerate() {
            if !set.contains(&x) {
                return Err(Error::config(format!("state {x} missing from its own neighborhood")));
            }
            if set.iter().any(|&y| y >= n_states) {
                return Err(Error::config(format!("neighborhood of state {x} references an unknown state")));
            }
        }
        match (op, &weights) {
            (NeighborhoodOp::Average, Some(w)) => {
                if w.len() != n_states {
                    return Err(Error::config("one weight vector per state required"));
                }
                for (x, wx) in w.iter().enumerate() {
                    if wx.len() != sets[x].len() {
                        return Err(Error::config(format!(
                            "weights for state {x} do not match its neighborhood size"
                        )));
                    }
                    if wx.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                        return Err(Error::config(format!("weights for state {x} must be nonnegative")));
                    }
                    let sum: f64 = wx.iter().sum();
                    if (sum - 1.0).abs() > PROB_TOL {
                        return Err(Error::config(format!(
                            "weights for state {x} sum to {sum}, expected 1"
                        )));
                    }
                }
            }
            (NeighborhoodOp::Average, None) => {
                return Err(Error::config("average operator requires weights"));
            }
            (_, Some(_)) => {
                return Err(Error::config("weights are only meaningful for the average operator"));
            }
            _ => {}
        }
        Ok(Self { sets, op, weights })
    }

    /// The identity map: every state is its own neighborhood. All three
    /// operator kinds degenerate to a plain lookup here.
    pub fn singleton(n_states: usize, op: NeighborhoodOp) -> Self {
        let sets = (0..n_states).map(|x| vec![x]).collect();
        let weights = match op {
            NeighborhoodOp::Average => Some(vec![vec![1.0]; n_states]),
            _ => None,
        };
        Self { sets, op, weights }
    }

    /// Neighborhoods induced by a partition: states in the same region share
    /// (the same vector for) their whole region as neighborhood.
    pub fn from_partition(partition: &Partition, op: NeighborhoodOp) -> Result<Self> {
        if op == NeighborhoodOp::Average {
            return Err(Error::config(
                "average operator needs weights; use from_partition_average",
            ));
        }
        let regions = partition.regions();
        let sets = partition
            .region_of
            .iter()
            .map(|&m| regions[m].clone())
            .collect();
        Self::new(sets, op, None)
    }

    /// Average-operator neighborhoods over a partition. `zeta` assigns one
    /// weight per state; within every region the weights must sum to one.
    pub fn from_partition_average(partition: &Partition, zeta: &[f64]) -> Result<Self> {
        if zeta.len() != partition.n_states() {
            return Err(Error::config("zeta must assign a weight to every state"));
        }
        let regions = partition.regions();
        let mut sets = Vec::with_capacity(partition.n_states());
        let mut weights = Vec::with_capacity(partition.n_states());
        for &m in &partition.region_of {
            let region = &regions[m];
            sets.push(region.clone());
            weights.push(region.iter().map(|&z| zeta[z]).collect());
        }
        Self::new(sets, NeighborhoodOp::Average, Some(weights))
    }

    pub fn n_states(&self) -> usize {
        self.sets.len()
    }

    pub fn op(&self) -> NeighborhoodOp {
        self.op
    }

    pub fn set(&self, state: usize) -> &[usize] {
        &self.sets[state]
    }

    /// Aggregates `q` over the neighborhood of `x` at policy column `c`.
    ///
    /// With a singleton neighborhood this returns `q(x, c)` exactly for all
    /// operator kinds.
    pub fn apply(&self, q: &FamilyQTable, x: usize, c: usize) -> Result<f64> {
        if self.sets.len() != q.n_states() {
            return Err(Error::config(format!(
                "neighborhood map covers {} states but Q-table has {}",
                self.sets.len(),
                q.n_states()
            )));
        }
        if x >= q.n_states() || c >= q.n_policies() {
            return Err(Error::invalid(format!("index ({x}, {c}) outside Q-table")));
        }
        Ok(self.apply_unchecked(q, x, c))
    }

    #[inline]
    pub(crate) fn apply_unchecked(&self, q: &FamilyQTable, x: usize, c: usize) -> f64 {
        let set = &self.sets[x];
        match self.op {
            NeighborhoodOp::Max => set
                .iter()
                .map(|&y| q.get(y, c))
                .fold(f64::NEG_INFINITY, f64::max),
            NeighborhoodOp::Min => set
                .iter()
                .map(|&y| q.get(y, c))
                .fold(f64::INFINITY, f64::min),
            NeighborhoodOp::Average => {
                let w = &self.weights.as_ref().expect("validated")[x];
                set.iter()
                    .zip(w)
                    .map(|(&y, &wy)| wy * q.get(y, c))
                    .sum()
            }
        }
    }
}

/// A partition of the state space into `n_regions` nonempty regions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    region_of: Vec<usize>,
    n_regions: usize,
}

impl Partition {
    /// `region_of[x]` is the region index of state `x`. Every region index
    /// in `0..n_regions` must be used.
    pub fn new(region_of: Vec<usize>, n_regions: usize) -> Result<Self> {
        if region_of.is_empty() || n_regions == 0 {
            return Err(Error::config("partition must be nonempty"));
        }
        let mut seen = vec![false; n_regions];
        for &m in &region_of {
            if m >= n_regions {
                return Err(Error::config(format!("region index {m} out of range")));
            }
            seen[m] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::config("every region must contain at least one state"));
        }
        Ok(Self {
            region_of,
            n_regions,
        })
    }

    /// One region per state.
    pub fn singletons(n_states: usize) -> Self {
        Self {
            region_of: (0..n_states).collect(),
            n_regions: n_states,
        }
    }

    /// The whole state space as a single region.
    pub fn whole(n_states: usize) -> Self {
        Self {
            region_of: vec![0; n_states],
            n_regions: 1,
        }
    }

    pub fn n_states(&self) -> usize {
        self.region_of.len()
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    #[inline]
    pub fn region(&self, state: usize) -> usize {
        self.region_of[state]
    }

    /// States grouped by region, each group in ascending state order.
    pub fn regions(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_regions];
        for (x, &m) in self.region_of.iter().enumerate() {
            out[m].push(x);
        }
        out
    }
}

/// Q-values indexed by (state, policy-in-family), row-major by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyQTable {
    values: Vec<f64>,
    n_states: usize,
    n_policies: usize,
}

impl FamilyQTable {
    pub fn zeros(n_states: usize, n_policies: usize) -> Self {
        Self {
            values: vec![0.0; n_states * n_policies],
            n_states,
            n_policies,
        }
    }

    pub fn from_values(values: Vec<f64>, n_states: usize, n_policies: usize) -> Result<Self> {
        if values.len() != n_states * n_policies {
            return Err(Error::config("Q-table size does not match dimensions"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("Q-table entries must be finite"));
        }
        Ok(Self {
            values,
            n_states,
            n_policies,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_policies(&self) -> usize {
        self.n_policies
    }

    #[inline]
    pub fn get(&self, state: usize, policy: usize) -> f64 {
        self.values[state * self.n_policies + policy]
    }

    #[inline]
    pub fn set(&mut self, state: usize, policy: usize, value: f64) {
        self.values[state * self.n_policies + policy] = value;
    }

    /// Largest absolute entry difference between two tables of equal shape.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Best policy value per state: `max_c q(x, c)`.
    pub fn state_values(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|x| {
                (0..self.n_policies)
                    .map(|c| self.get(x, c))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

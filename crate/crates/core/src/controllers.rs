//! Parameterized controller families mapping continuous states to discrete
//! actions.
//!
//! A controller computes a continuous control vector `u = B_m x + b_m`,
//! optionally augmented with monomial features of the state, where `m` is
//! the region of a coarse state partition. Symmetry ties can pin parameters
//! of one region to (sign-flipped) parameters of another, shrinking the free
//! parameter vector the optimizer searches. A per-environment quantizer then
//! thresholds `u` into the environment's discrete action set.

use serde::{Deserialize, Serialize};

use crate::envs::{Agent, EnvKind};
use crate::error::{Error, Result};

/// Which structural family a controller belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerFamily {
    Linear,
    /// Piecewise linear over a state partition.
    Pwl,
    /// Linear plus monomial features of the state.
    Nonlinear,
}

/// Deterministic map from a state to a partition region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PartitionRule {
    /// One region covering everything.
    Single,
    /// Two regions split by the sign of one state component.
    SignSplit { dim: usize },
    /// Four regions from the sign pattern of two state components.
    SignQuadrant { dim_a: usize, dim_b: usize },
}

impl PartitionRule {
    pub fn n_regions(&self) -> usize {
        match self {
            PartitionRule::Single => 1,
            PartitionRule::SignSplit { .. } => 2,
            PartitionRule::SignQuadrant { .. } => 4,
        }
    }

    pub fn region_of(&self, state: &[f64]) -> usize {
        match *self {
            PartitionRule::Single => 0,
            PartitionRule::SignSplit { dim } => usize::from(state[dim] >= 0.0),
            PartitionRule::SignQuadrant { dim_a, dim_b } => {
                usize::from(state[dim_a] >= 0.0) + 2 * usize::from(state[dim_b] >= 0.0)
            }
        }
    }

    fn max_dim(&self) -> usize {
        match *self {
            PartitionRule::Single => 0,
            PartitionRule::SignSplit { dim } => dim,
            PartitionRule::SignQuadrant { dim_a, dim_b } => dim_a.max(dim_b),
        }
    }
}

/// Monomial features appended to the state before the linear map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "features", rename_all = "snake_case")]
pub enum FeatureSet {
    None,
    /// The single square of one state component.
    SquareOfDim { dim: usize },
    /// All degree-2 monomials `x_i * x_j`, `i <= j`.
    Degree2Monomials,
}

impl FeatureSet {
    pub fn count(&self, state_dim: usize) -> usize {
        match self {
            FeatureSet::None => 0,
            FeatureSet::SquareOfDim { .. } => 1,
            FeatureSet::Degree2Monomials => state_dim * (state_dim + 1) / 2,
        }
    }

    fn push_values(&self, state: &[f64], out: &mut Vec<f64>) {
        match *self {
            FeatureSet::None => {}
            FeatureSet::SquareOfDim { dim } => out.push(state[dim] * state[dim]),
            FeatureSet::Degree2Monomials => {
                for i in 0..state.len() {
                    for j in i..state.len() {
                        out.push(state[i] * state[j]);
                    }
                }
            }
        }
    }
}

/// Pins one full-layout parameter to a sign-flipped copy of another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryTie {
    pub source: usize,
    pub target: usize,
    /// +1.0 or -1.0.
    pub sign: f64,
}

pub const DEFAULT_GENE_BOUNDS: (f64, f64) = (-10.0, 10.0);

/// Shape, partition, features, ties and search box of a controller family.
///
/// The full parameter layout is region-major: for each region, the rows of
/// `B` (one per control output, each `state_dim + n_features` wide) followed
/// by the bias vector. The genome is the subsequence of parameters that are
/// not tie targets, in layout order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub family: ControllerFamily,
    pub state_dim: usize,
    pub control_dim: usize,
    pub partition: PartitionRule,
    pub features: FeatureSet,
    #[serde(default)]
    pub ties: Vec<SymmetryTie>,
    /// Per-gene search box for the optimizer.
    pub bounds: (f64, f64),
    /// Optional fixed per-dimension input gains: the measurement map applied
    /// to the state before the linear law and the features. Typically set
    /// from the environment bounds so every channel spans a similar range,
    /// which keeps the search box meaningful across dimensions. Positive
    /// gains leave sign-based partitions untouched.
    #[serde(default)]
    pub state_scale: Option<Vec<f64>>,
}

impl ControllerSpec {
    pub fn linear(state_dim: usize, control_dim: usize) -> Self {
        Self {
            family: ControllerFamily::Linear,
            state_dim,
            control_dim,
            partition: PartitionRule::Single,
            features: FeatureSet::None,
            ties: Vec::new(),
            bounds: DEFAULT_GENE_BOUNDS,
            state_scale: None,
        }
    }

    pub fn nonlinear(state_dim: usize, control_dim: usize, features: FeatureSet) -> Result<Self> {
        if features == FeatureSet::None {
            return Err(Error::config("nonlinear controller needs a feature set"));
        }
        let spec = Self {
            family: ControllerFamily::Nonlinear,
            state_dim,
            control_dim,
            partition: PartitionRule::Single,
            features,
            ties: Vec::new(),
            bounds: DEFAULT_GENE_BOUNDS,
            state_scale: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn pwl(
        state_dim: usize,
        control_dim: usize,
        partition: PartitionRule,
        ties: Vec<SymmetryTie>,
    ) -> Result<Self> {
        let spec = Self {
            family: ControllerFamily::Pwl,
            state_dim,
            control_dim,
            partition,
            features: FeatureSet::None,
            ties,
            bounds: DEFAULT_GENE_BOUNDS,
            state_scale: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_bounds(mut self, low: f64, high: f64) -> Result<Self> {
        if low >= high {
            return Err(Error::config("gene bounds need low < high"));
        }
        self.bounds = (low, high);
        Ok(self)
    }

    pub fn with_state_scale(mut self, scale: Vec<f64>) -> Result<Self> {
        self.state_scale = Some(scale);
        self.validate()?;
        Ok(self)
    }

    /// Gains mapping each state channel to roughly [-1, 1] given its bounds,
    /// with zero kept fixed.
    pub fn state_scale_for(bounds: &[(f64, f64)]) -> Vec<f64> {
        bounds
            .iter()
            .map(|&(lo, hi)| {
                let magnitude = lo.abs().max(hi.abs());
                if magnitude > 0.0 {
                    1.0 / magnitude
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Mirror-symmetric two-region controller for the lander: regions split
    /// by the sign of the horizontal position, the lateral control row
    /// negated between them and everything else shared. Has exactly as many
    /// free parameters as the plain linear controller.
    pub fn lander_pwl_symmetric_m2() -> Self {
        let mut spec = Self {
            family: ControllerFamily::Pwl,
            state_dim: 6,
            control_dim: 2,
            partition: PartitionRule::SignSplit { dim: 0 },
            features: FeatureSet::None,
            ties: Vec::new(),
            bounds: DEFAULT_GENE_BOUNDS,
            state_scale: None,
        };
        spec.ties = spec.mirror_ties(0, 1, 0);
        spec.validate().expect("built-in spec is valid");
        spec
    }

    /// Four-region variant: quadrants of (horizontal position, horizontal
    /// velocity), with quadrants tied pairwise under the mirror map.
    pub fn lander_pwl_symmetric_m4() -> Self {
        let mut spec = Self {
            family: ControllerFamily::Pwl,
            state_dim: 6,
            control_dim: 2,
            partition: PartitionRule::SignQuadrant { dim_a: 0, dim_b: 2 },
            features: FeatureSet::None,
            ties: Vec::new(),
            bounds: DEFAULT_GENE_BOUNDS,
            state_scale: None,
        };
        // (x<0, vx<0) mirrors to (x>=0, vx>=0); (x>=0, vx<0) to (x<0, vx>=0)
        let mut ties = spec.mirror_ties(0, 3, 0);
        ties.extend(spec.mirror_ties(1, 2, 0));
        spec.ties = ties;
        spec.validate().expect("built-in spec is valid");
        spec
    }

    /// Ties making `target_region` a copy of `source_region` with one
    /// control row's weights negated (biases shared unflipped).
    pub fn mirror_ties(
        &self,
        source_region: usize,
        target_region: usize,
        negated_row: usize,
    ) -> Vec<SymmetryTie> {
        let mut ties = Vec::new();
        for row in 0..self.control_dim {
            let sign = if row == negated_row { -1.0 } else { 1.0 };
            for col in 0..self.input_dim() {
                ties.push(SymmetryTie {
                    source: self.weight_index(source_region, row, col),
                    target: self.weight_index(target_region, row, col),
                    sign,
                });
            }
            ties.push(SymmetryTie {
                source: self.bias_index(source_region, row),
                target: self.bias_index(target_region, row),
                sign: 1.0,
            });
        }
        ties
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.control_dim == 0 {
            return Err(Error::config("controller dimensions must be positive"));
        }
        if self.partition.max_dim() >= self.state_dim {
            return Err(Error::config("partition rule references a missing state dim"));
        }
        if let FeatureSet::SquareOfDim { dim } = self.features {
            if dim >= self.state_dim {
                return Err(Error::config("feature references a missing state dim"));
            }
        }
        if let Some(scale) = &self.state_scale {
            if scale.len() != self.state_dim {
                return Err(Error::config("state_scale must cover every state dim"));
            }
            if scale.iter().any(|&g| g <= 0.0 || !g.is_finite()) {
                return Err(Error::config("state_scale gains must be positive and finite"));
            }
        }
        match self.family {
            ControllerFamily::Linear => {
                if self.partition.n_regions() != 1 || self.features != FeatureSet::None {
                    return Err(Error::config("linear controller is single-region, feature-free"));
                }
            }
            ControllerFamily::Pwl => {
                if self.features != FeatureSet::None {
                    return Err(Error::config("piecewise-linear controller takes no features"));
                }
            }
            ControllerFamily::Nonlinear => {
                if self.partition.n_regions() != 1 {
                    return Err(Error::config("nonlinear controller is single-region"));
                }
            }
        }
        if self.bounds.0 >= self.bounds.1 {
            return Err(Error::config("gene bounds need low < high"));
        }
        let full = self.full_len();
        let mut is_target = vec![false; full];
        for tie in &self.ties {
            if tie.source >= full || tie.target >= full {
                return Err(Error::config("tie references a parameter outside the layout"));
            }
            if tie.source == tie.target {
                return Err(Error::config("tie cannot target its own source"));
            }
            if tie.sign != 1.0 && tie.sign != -1.0 {
                return Err(Error::config("tie sign must be +1 or -1"));
            }
            if is_target[tie.target] {
                return Err(Error::config("parameter tied twice"));
            }
            is_target[tie.target] = true;
        }
        for tie in &self.ties {
            if is_target[tie.source] {
                return Err(Error::config("tie source must be a free parameter"));
            }
        }
        Ok(())
    }

    pub fn n_regions(&self) -> usize {
        self.partition.n_regions()
    }

    /// Width of the linear map input: state plus appended features.
    pub fn input_dim(&self) -> usize {
        self.state_dim + self.features.count(self.state_dim)
    }

    fn params_per_region(&self) -> usize {
        self.control_dim * self.input_dim() + self.control_dim
    }

    /// Length of the full (untied) parameter layout.
    pub fn full_len(&self) -> usize {
        self.n_regions() * self.params_per_region()
    }

    /// Index of `B_region[row, col]` in the full layout.
    pub fn weight_index(&self, region: usize, row: usize, col: usize) -> usize {
        region * self.params_per_region() + row * self.input_dim() + col
    }

    /// Index of `b_region[row]` in the full layout.
    pub fn bias_index(&self, region: usize, row: usize) -> usize {
        region * self.params_per_region() + self.control_dim * self.input_dim() + row
    }

    fn free_mask(&self) -> Vec<bool> {
        let mut free = vec![true; self.full_len()];
        for tie in &self.ties {
            free[tie.target] = false;
        }
        free
    }

    /// Number of free parameters: the optimizer's search dimension.
    pub fn genome_length(&self) -> usize {
        self.full_len() - self.ties.len()
    }

    pub fn genome_bounds(&self) -> Vec<(f64, f64)> {
        vec![self.bounds; self.genome_length()]
    }

    /// Expands a genome of free parameters into the full layout, filling tie
    /// targets from their sources.
    pub fn decode(&self, genome: &[f64]) -> Result<Vec<f64>> {
        if genome.len() != self.genome_length() {
            return Err(Error::invalid(format!(
                "genome length {} does not match spec ({})",
                genome.len(),
                self.genome_length()
            )));
        }
        let mut full = vec![0.0; self.full_len()];
        let mut next = 0;
        for (idx, free) in self.free_mask().iter().enumerate() {
            if *free {
                full[idx] = genome[next];
                next += 1;
            }
        }
        for tie in &self.ties {
            full[tie.target] = tie.sign * full[tie.source];
        }
        Ok(full)
    }

    /// Extracts the free parameters from a full layout. Tied entries are
    /// reconstructed from their sources on decode, so their values here are
    /// ignored.
    pub fn encode(&self, full: &[f64]) -> Result<Vec<f64>> {
        if full.len() != self.full_len() {
            return Err(Error::invalid(format!(
                "full parameter length {} does not match spec ({})",
                full.len(),
                self.full_len()
            )));
        }
        Ok(self
            .free_mask()
            .iter()
            .zip(full)
            .filter_map(|(free, &v)| free.then_some(v))
            .collect())
    }

    /// Continuous control for `state` under the given genome.
    pub fn act_continuous(&self, genome: &[f64], state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::invalid(format!(
                "state has {} dims, controller expects {}",
                state.len(),
                self.state_dim
            )));
        }
        let full = self.decode(genome)?;
        Ok(self.act_decoded(&full, state))
    }

    fn act_decoded(&self, full: &[f64], state: &[f64]) -> Vec<f64> {
        let region = self.partition.region_of(state);
        let mut inputs = Vec::with_capacity(self.input_dim());
        match &self.state_scale {
            Some(scale) => inputs.extend(state.iter().zip(scale).map(|(s, g)| s * g)),
            None => inputs.extend_from_slice(state),
        }
        let measured = inputs.clone();
        self.features.push_values(&measured, &mut inputs);
        (0..self.control_dim)
            .map(|row| {
                let mut u = full[self.bias_index(region, row)];
                for (col, &v) in inputs.iter().enumerate() {
                    u += full[self.weight_index(region, row, col)] * v;
                }
                u
            })
            .collect()
    }
}

/// Thresholding scheme from a continuous control vector to a discrete
/// action index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantizer {
    /// One control dim, two actions: nonnegative pushes toward the higher
    /// action index.
    SignBinary,
    /// One control dim, three actions: below `-tau`, dead zone, above `tau`.
    TriThreshold { tau: f64 },
    /// Two control dims (lateral, vertical), four actions. The vertical
    /// channel wins: above `tau_vertical` fires the main engine, otherwise
    /// the lateral channel picks a side thruster, else no-op.
    LanderPriority { tau_vertical: f64, tau_lateral: f64 },
}

impl Quantizer {
    /// Default quantizer for an environment (all thresholds zero).
    pub fn for_env(kind: EnvKind) -> Self {
        match kind {
            EnvKind::CartPole => Quantizer::SignBinary,
            EnvKind::MountainCar => Quantizer::TriThreshold { tau: 0.0 },
            EnvKind::Lander => Quantizer::LanderPriority {
                tau_vertical: 0.0,
                tau_lateral: 0.0,
            },
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            Quantizer::SignBinary | Quantizer::TriThreshold { .. } => 1,
            Quantizer::LanderPriority { .. } => 2,
        }
    }

    /// Size of the discrete action set this quantizer emits into.
    pub fn action_count(&self) -> usize {
        match self {
            Quantizer::SignBinary => 2,
            Quantizer::TriThreshold { .. } => 3,
            Quantizer::LanderPriority { .. } => 4,
        }
    }

    pub fn quantize(&self, u: &[f64]) -> Result<usize> {
        if u.len() != self.control_dim() {
            return Err(Error::config(format!(
                "control vector has {} dims, quantizer expects {}",
                u.len(),
                self.control_dim()
            )));
        }
        Ok(self.quantize_unchecked(u))
    }

    #[inline]
    fn quantize_unchecked(&self, u: &[f64]) -> usize {
        match *self {
            Quantizer::SignBinary => usize::from(u[0] >= 0.0),
            Quantizer::TriThreshold { tau } => {
                if u[0] < -tau {
                    0
                } else if u[0] > tau {
                    2
                } else {
                    1
                }
            }
            Quantizer::LanderPriority {
                tau_vertical,
                tau_lateral,
            } => {
                if u[1] > tau_vertical {
                    crate::envs::LANDER_MAIN
                } else if u[0].abs() > tau_lateral {
                    if u[0] > 0.0 {
                        crate::envs::LANDER_RIGHT
                    } else {
                        crate::envs::LANDER_LEFT
                    }
                } else {
                    crate::envs::LANDER_NOOP
                }
            }
        }
    }
}

/// A spec bound to a concrete genome and quantizer; decodes once and acts as
/// a discrete-action agent.
#[derive(Debug, Clone)]
pub struct Controller {
    spec: ControllerSpec,
    genome: Vec<f64>,
    decoded: Vec<f64>,
    quantizer: Quantizer,
}

impl Controller {
    pub fn new(spec: ControllerSpec, genome: Vec<f64>, quantizer: Quantizer) -> Result<Self> {
        spec.validate()?;
        if quantizer.control_dim() != spec.control_dim {
            return Err(Error::config(format!(
                "quantizer expects {} control dims, spec has {}",
                quantizer.control_dim(),
                spec.control_dim
            )));
        }
        let decoded = spec.decode(&genome)?;
        Ok(Self {
            spec,
            genome,
            decoded,
            quantizer,
        })
    }

    pub fn spec(&self) -> &ControllerSpec {
        &self.spec
    }

    pub fn genome(&self) -> &[f64] {
        &self.genome
    }

    pub fn control(&self, state: &[f64]) -> Vec<f64> {
        self.spec.act_decoded(&self.decoded, state)
    }
}

impl Agent for Controller {
    fn act(&self, state: &[f64]) -> usize {
        self.quantizer.quantize_unchecked(&self.control(state))
    }

    fn state_dim(&self) -> Option<usize> {
        Some(self.spec.state_dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_genome_zero_control() {
        let spec = ControllerSpec::linear(3, 2);
        let u = spec
            .act_continuous(&vec![0.0; spec.genome_length()], &[1.0, -2.0, 3.0])
            .unwrap();
        assert_eq!(u, vec![0.0, 0.0]);
    }

    #[test]
    fn linear_dot_product() {
        let spec = ControllerSpec::linear(2, 1);
        // layout: B row [w0, w1], then bias
        let genome = vec![1.0, -1.0, 0.5];
        let u = spec.act_continuous(&genome, &[2.0, 1.0]).unwrap();
        assert_eq!(u, vec![1.5]);
    }

    #[test]
    fn square_feature_feeds_one_coordinate() {
        let spec = ControllerSpec::nonlinear(6, 2, FeatureSet::SquareOfDim { dim: 0 }).unwrap();
        assert_eq!(spec.genome_length(), 16);
        let mut genome = vec![0.0; 16];
        // weight of the appended feature column in control row 0
        genome[spec.weight_index(0, 0, 6)] = 2.0;
        let mut state = vec![0.0; 6];
        state[0] = 3.0;
        let u = spec.act_continuous(&genome, &state).unwrap();
        assert_eq!(u, vec![18.0, 0.0]);
    }

    #[test]
    fn genome_lengths_match_published_counts() {
        assert_eq!(ControllerSpec::linear(6, 2).genome_length(), 14);
        assert_eq!(
            ControllerSpec::nonlinear(6, 2, FeatureSet::SquareOfDim { dim: 0 })
                .unwrap()
                .genome_length(),
            16
        );
        assert_eq!(ControllerSpec::lander_pwl_symmetric_m2().genome_length(), 14);
        assert_eq!(ControllerSpec::lander_pwl_symmetric_m4().genome_length(), 28);
        // degree-2 monomials: two dims give three features
        assert_eq!(
            ControllerSpec::nonlinear(2, 1, FeatureSet::Degree2Monomials)
                .unwrap()
                .genome_length(),
            6
        );
    }

    #[test]
    fn decode_applies_mirror_ties_exactly() {
        let spec = ControllerSpec::lander_pwl_symmetric_m2();
        let genome: Vec<f64> = (0..14).map(|i| i as f64 - 6.5).collect();
        let full = spec.decode(&genome).unwrap();
        for col in 0..6 {
            assert_eq!(
                full[spec.weight_index(1, 0, col)],
                -full[spec.weight_index(0, 0, col)]
            );
            assert_eq!(
                full[spec.weight_index(1, 1, col)],
                full[spec.weight_index(0, 1, col)]
            );
        }
        for row in 0..2 {
            assert_eq!(full[spec.bias_index(1, row)], full[spec.bias_index(0, row)]);
        }
    }

    #[test]
    fn encode_decode_roundtrip() {
        for spec in [
            ControllerSpec::linear(4, 1),
            ControllerSpec::lander_pwl_symmetric_m2(),
            ControllerSpec::lander_pwl_symmetric_m4(),
            ControllerSpec::nonlinear(3, 2, FeatureSet::Degree2Monomials).unwrap(),
        ] {
            let genome: Vec<f64> = (0..spec.genome_length())
                .map(|i| (i as f64 * 0.37).sin())
                .collect();
            let full = spec.decode(&genome).unwrap();
            assert_eq!(spec.encode(&full).unwrap(), genome);
        }
    }

    #[test]
    fn affine_within_region() {
        // three collinear states inside one region give collinear controls
        let spec = ControllerSpec::lander_pwl_symmetric_m4();
        let genome: Vec<f64> = (0..spec.genome_length())
            .map(|i| ((i * 13 + 5) % 17) as f64 / 17.0 - 0.3)
            .collect();
        let a = [0.5, 3.0, 0.2, -0.5, 0.1, 0.0];
        let b = [1.5, 5.0, 0.6, -0.1, -0.1, 0.02];
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        assert_eq!(spec.partition.region_of(&a), spec.partition.region_of(&b));
        assert_eq!(spec.partition.region_of(&a), spec.partition.region_of(&mid));
        let ua = spec.act_continuous(&genome, &a).unwrap();
        let ub = spec.act_continuous(&genome, &b).unwrap();
        let um = spec.act_continuous(&genome, &mid).unwrap();
        for d in 0..2 {
            assert!((um[d] - 0.5 * (ua[d] + ub[d])).abs() < 1e-12);
        }
    }

    #[test]
    fn state_scale_is_a_fixed_input_gain() {
        let spec = ControllerSpec::linear(2, 1)
            .with_state_scale(vec![0.5, 10.0])
            .unwrap();
        let genome = vec![1.0, 1.0, 0.0];
        let u = spec.act_continuous(&genome, &[2.0, 0.07]).unwrap();
        assert!((u[0] - (1.0 * 1.0 + 0.07 * 10.0)).abs() < 1e-15);
        // features see the measured (scaled) state
        let nl = ControllerSpec::nonlinear(2, 1, FeatureSet::SquareOfDim { dim: 1 })
            .unwrap()
            .with_state_scale(vec![1.0, 10.0])
            .unwrap();
        let mut g = vec![0.0; nl.genome_length()];
        g[nl.weight_index(0, 0, 2)] = 1.0;
        let u = nl.act_continuous(&g, &[0.0, 0.2]).unwrap();
        assert!((u[0] - 4.0).abs() < 1e-15);
        // sign-based partitions are unaffected by positive gains
        assert!(ControllerSpec::linear(2, 1)
            .with_state_scale(vec![1.0, -2.0])
            .is_err());
    }

    #[test]
    fn quantizer_rules() {
        let cp = Quantizer::for_env(EnvKind::CartPole);
        assert_eq!(cp.quantize(&[0.0]).unwrap(), 1); // tie goes right
        assert_eq!(cp.quantize(&[-0.001]).unwrap(), 0);

        let mc = Quantizer::for_env(EnvKind::MountainCar);
        assert_eq!(mc.quantize(&[-0.2]).unwrap(), 0);
        assert_eq!(mc.quantize(&[0.0]).unwrap(), 1); // dead zone at exactly tau
        assert_eq!(mc.quantize(&[0.3]).unwrap(), 2);

        let ld = Quantizer::for_env(EnvKind::Lander);
        assert_eq!(ld.quantize(&[0.5, 0.9]).unwrap(), crate::envs::LANDER_MAIN);
        assert_eq!(ld.quantize(&[0.5, -0.1]).unwrap(), crate::envs::LANDER_RIGHT);
        assert_eq!(ld.quantize(&[-0.5, 0.0]).unwrap(), crate::envs::LANDER_LEFT);
        assert_eq!(ld.quantize(&[0.0, 0.0]).unwrap(), crate::envs::LANDER_NOOP);
    }

    #[test]
    fn quantizer_checks_dimensions() {
        assert!(Quantizer::SignBinary.quantize(&[0.1, 0.2]).is_err());
        assert!(Quantizer::for_env(EnvKind::Lander).quantize(&[0.1]).is_err());
    }

    #[test]
    fn ties_must_reference_free_sources() {
        let mut spec = ControllerSpec::lander_pwl_symmetric_m2();
        // add a tie whose source is itself a target
        let bad = SymmetryTie {
            source: spec.ties[0].target,
            target: spec.bias_index(0, 0),
            sign: 1.0,
        };
        spec.ties.push(bad);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn controller_binds_and_acts() {
        let spec = ControllerSpec::linear(4, 1);
        let genome = vec![0.0, 0.0, 5.0, 0.0, 0.0]; // respond to pole angle
        let ctl = Controller::new(spec, genome, Quantizer::SignBinary).unwrap();
        assert_eq!(ctl.act(&[0.0, 0.0, 0.1, 0.0]), 1);
        assert_eq!(ctl.act(&[0.0, 0.0, -0.1, 0.0]), 0);
        assert_eq!(ctl.state_dim(), Some(4));
    }

    #[test]
    fn controller_rejects_wrong_genome_length() {
        let spec = ControllerSpec::linear(4, 1);
        assert!(Controller::new(spec, vec![0.0; 4], Quantizer::SignBinary).is_err());
    }

    #[test]
    fn spec_serializes_for_configs() {
        let spec = ControllerSpec::lander_pwl_symmetric_m2();
        let text = serde_json::to_string(&spec).unwrap();
        let back: ControllerSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.genome_length(), 14);
        assert_eq!(back.partition, spec.partition);
    }
}

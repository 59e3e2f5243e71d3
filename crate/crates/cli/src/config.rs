//! Declarative experiment configuration.
//!
//! One TOML file describes an environment, budgets and up to two methods.
//! `train` requires exactly one method table, `bench` both. See the README
//! for the full key reference.

use anyhow::{bail, Context};
use serde::Deserialize;

use cbrl_core::bench::{ExperimentConfig, MethodConfig};
use cbrl_core::controllers::{ControllerSpec, FeatureSet, Quantizer};
use cbrl_core::envs::{CartPoleParams, EnvKind, EnvParams, LanderParams, MountainCarParams};
use cbrl_core::qlearn::QlboHyperparams;
use cbrl_core::search::{
    DeConfig, DeStrategy, FitnessConfig, LocalSearchConfig, SearchMethod, SeedMode,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub env: String,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub train_episodes: u64,
    #[serde(default = "default_test_episodes")]
    pub test_episodes: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub cbrl: Option<CbrlTable>,
    #[serde(default)]
    pub qlbo: Option<QlboTable>,
    /// Physics overrides keyed by environment name.
    #[serde(default)]
    pub env_overrides: Option<toml::Table>,
}

fn default_trials() -> usize {
    5
}

fn default_test_episodes() -> usize {
    100
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbrlTable {
    /// linear | pwl-sym-m2 | pwl-sym-m4 | nonlinear-square | nonlinear-quadratic
    pub controller: String,
    #[serde(default = "default_k")]
    pub episodes_per_eval: usize,
    /// fixed | fresh
    #[serde(default = "default_seed_mode")]
    pub seed_mode: String,
    /// de | local-search
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_np")]
    pub np: usize,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default = "default_crossover")]
    pub crossover: f64,
    /// rand-1-bin | best-1-bin
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default)]
    pub validation_episodes: Option<usize>,
    /// Normalize controller inputs by the environment bounds.
    #[serde(default = "default_true")]
    pub scale_inputs: bool,
    #[serde(default)]
    pub bounds: Option<(f64, f64)>,
    #[serde(default)]
    pub track_region_returns: bool,
    #[serde(default)]
    pub quantizer_tau: Option<f64>,
}

fn default_k() -> usize {
    5
}
fn default_seed_mode() -> String {
    "fixed".into()
}
fn default_optimizer() -> String {
    "de".into()
}
fn default_np() -> usize {
    30
}
fn default_weight() -> f64 {
    0.8
}
fn default_crossover() -> f64 {
    0.9
}
fn default_strategy() -> String {
    "rand-1-bin".into()
}
fn default_true() -> bool {
    true
}

// no deny_unknown_fields here: serde cannot combine it with flatten
#[derive(Debug, Deserialize, Default)]
pub struct QlboTable {
    #[serde(default)]
    pub bins: Option<Vec<usize>>,
    #[serde(flatten)]
    pub hyperparams: QlboHyperparams,
}

impl FileConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn env_kind(&self) -> anyhow::Result<EnvKind> {
        Ok(EnvKind::from_name(&self.env)?)
    }

    pub fn env_params(&self) -> anyhow::Result<Option<EnvParams>> {
        let Some(overrides) = &self.env_overrides else {
            return Ok(None);
        };
        let kind = self.env_kind()?;
        let Some(table) = overrides.get(kind.name()) else {
            return Ok(None);
        };
        let text = toml::to_string(table)?;
        let params = match kind {
            EnvKind::CartPole => EnvParams::CartPole(toml::from_str::<CartPoleParams>(&text)?),
            EnvKind::MountainCar => {
                EnvParams::MountainCar(toml::from_str::<MountainCarParams>(&text)?)
            }
            EnvKind::Lander => EnvParams::Lander(toml::from_str::<LanderParams>(&text)?),
        };
        Ok(Some(params))
    }

    /// The controller spec and quantizer of the `[cbrl]` table.
    pub fn controller(&self) -> anyhow::Result<(ControllerSpec, Quantizer)> {
        let table = self.cbrl.as_ref().context("config has no [cbrl] table")?;
        let kind = self.env_kind()?;
        build_controller(table, kind, self.env_params()?)
    }

    fn method_cbrl(&self) -> anyhow::Result<MethodConfig> {
        let table = self.cbrl.as_ref().context("config has no [cbrl] table")?;
        let kind = self.env_kind()?;
        let (controller, quantizer) = build_controller(table, kind, self.env_params()?)?;
        let seed_mode = match table.seed_mode.as_str() {
            "fixed" => SeedMode::FixedSet,
            "fresh" => SeedMode::FreshPerGeneration,
            other => bail!("unknown seed_mode '{other}' (expected fixed | fresh)"),
        };
        let strategy = match table.strategy.as_str() {
            "rand-1-bin" => DeStrategy::Rand1Bin,
            "best-1-bin" => DeStrategy::Best1Bin,
            other => bail!("unknown strategy '{other}' (expected rand-1-bin | best-1-bin)"),
        };
        let search = match table.optimizer.as_str() {
            "de" => SearchMethod::De(DeConfig {
                np: table.np,
                weight: table.weight,
                crossover: table.crossover,
                strategy,
            }),
            "local-search" => SearchMethod::LocalSearch(LocalSearchConfig {
                trials_per_round: table.np,
                ..LocalSearchConfig::default()
            }),
            other => bail!("unknown optimizer '{other}' (expected de | local-search)"),
        };
        Ok(MethodConfig::Cbrl {
            controller,
            quantizer: Some(quantizer),
            fitness: FitnessConfig {
                episodes_per_eval: table.episodes_per_eval,
                seed_mode,
            },
            search,
            track_region_returns: table.track_region_returns,
            validation_episodes: table.validation_episodes,
        })
    }

    fn method_qlbo(&self) -> anyhow::Result<MethodConfig> {
        let table = self.qlbo.as_ref().context("config has no [qlbo] table")?;
        Ok(MethodConfig::Qlbo {
            bins: table.bins.clone(),
            hyperparams: table.hyperparams,
        })
    }

    fn experiment_with(&self, method: MethodConfig, label: &str) -> anyhow::Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            env: self.env_kind()?,
            env_params: self.env_params()?,
            method,
            trials: self.trials,
            train_episodes: self.train_episodes,
            test_episodes: self.test_episodes,
            master_seed: self.master_seed,
            label: self.label.clone().or_else(|| Some(label.to_string())).filter(|l| !l.is_empty()),
        })
    }

    /// Experiment for `train`: exactly one method table must be present.
    pub fn single_experiment(&self) -> anyhow::Result<ExperimentConfig> {
        match (&self.cbrl, &self.qlbo) {
            (Some(_), None) => {
                let method = self.method_cbrl()?;
                let label = method.default_label();
                self.experiment_with(method, &label)
            }
            (None, Some(_)) => {
                let method = self.method_qlbo()?;
                self.experiment_with(method, "qlbo")
            }
            (Some(_), Some(_)) => bail!("train expects exactly one of [cbrl] or [qlbo]; use `bench` to run both"),
            (None, None) => bail!("config needs a [cbrl] or [qlbo] method table"),
        }
    }

    /// Experiments for `bench`: both method tables required.
    pub fn paired_experiments(&self) -> anyhow::Result<(ExperimentConfig, ExperimentConfig)> {
        if self.cbrl.is_none() || self.qlbo.is_none() {
            bail!("bench needs both [cbrl] and [qlbo] tables");
        }
        let cbrl_method = self.method_cbrl()?;
        let cbrl_label = cbrl_method.default_label();
        let mut cbrl = self.experiment_with(cbrl_method, &cbrl_label)?;
        let mut qlbo = self.experiment_with(self.method_qlbo()?, "qlbo")?;
        // a shared label would collide in the comparison table
        cbrl.label = Some(cbrl_label);
        qlbo.label = Some("qlbo".into());
        Ok((cbrl, qlbo))
    }
}

fn build_controller(
    table: &CbrlTable,
    kind: EnvKind,
    env_params: Option<EnvParams>,
) -> anyhow::Result<(ControllerSpec, Quantizer)> {
    let env = match env_params {
        Some(p) => p.build()?,
        None => kind.build(),
    };
    let spec = env.spec();
    let (state_dim, control_dim) = (spec.state_dim, spec.control_dim);
    let mut controller = match table.controller.as_str() {
        "linear" => ControllerSpec::linear(state_dim, control_dim),
        "pwl-sym-m2" => {
            require_lander(kind, "pwl-sym-m2")?;
            ControllerSpec::lander_pwl_symmetric_m2()
        }
        "pwl-sym-m4" => {
            require_lander(kind, "pwl-sym-m4")?;
            ControllerSpec::lander_pwl_symmetric_m4()
        }
        "nonlinear-square" => {
            ControllerSpec::nonlinear(state_dim, control_dim, FeatureSet::SquareOfDim { dim: 0 })?
        }
        "nonlinear-quadratic" => {
            ControllerSpec::nonlinear(state_dim, control_dim, FeatureSet::Degree2Monomials)?
        }
        other => bail!(
            "unknown controller '{other}' (expected linear | pwl-sym-m2 | pwl-sym-m4 | \
             nonlinear-square | nonlinear-quadratic)"
        ),
    };
    if table.scale_inputs {
        controller = controller.with_state_scale(ControllerSpec::state_scale_for(&spec.state_bounds))?;
    }
    if let Some((lo, hi)) = table.bounds {
        controller = controller.with_bounds(lo, hi)?;
    }
    let quantizer = match (Quantizer::for_env(kind), table.quantizer_tau) {
        (q, None) => q,
        (Quantizer::SignBinary, Some(_)) => bail!("the two-action quantizer has no threshold"),
        (Quantizer::TriThreshold { .. }, Some(tau)) => Quantizer::TriThreshold { tau },
        (Quantizer::LanderPriority { .. }, Some(tau)) => Quantizer::LanderPriority {
            tau_vertical: tau,
            tau_lateral: tau,
        },
    };
    Ok((controller, quantizer))
}

fn require_lander(kind: EnvKind, name: &str) -> anyhow::Result<()> {
    if kind != EnvKind::Lander {
        bail!("controller '{name}' is shaped for the lander's 6-dimensional state");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
env = "mountaincar"
trials = 2
train_episodes = 500
test_episodes = 10
master_seed = 7

[cbrl]
controller = "linear"
episodes_per_eval = 3
validation_episodes = 10
"#;

    #[test]
    fn parses_single_method_config() {
        let cfg = FileConfig::parse(SAMPLE).unwrap();
        let exp = cfg.single_experiment().unwrap();
        assert_eq!(exp.trials, 2);
        assert_eq!(exp.label.as_deref(), Some("cbrl-linear"));
        match exp.method {
            MethodConfig::Cbrl { controller, fitness, .. } => {
                assert_eq!(controller.genome_length(), 3);
                assert!(controller.state_scale.is_some());
                assert_eq!(fitness.episodes_per_eval, 3);
            }
            _ => panic!("expected a controller-search method"),
        }
    }

    #[test]
    fn bench_requires_both_tables() {
        let cfg = FileConfig::parse(SAMPLE).unwrap();
        assert!(cfg.paired_experiments().is_err());
    }

    #[test]
    fn env_overrides_deserialize() {
        let text = r#"
env = "cartpole"
train_episodes = 10
[qlbo]
[env_overrides.cartpole]
force_mag = 12.5
"#;
        let cfg = FileConfig::parse(text).unwrap();
        match cfg.env_params().unwrap() {
            Some(EnvParams::CartPole(p)) => assert_eq!(p.force_mag, 12.5),
            other => panic!("expected cartpole params, got {other:?}"),
        }
    }

    #[test]
    fn lander_controllers_are_env_checked() {
        let text = r#"
env = "cartpole"
train_episodes = 10
[cbrl]
controller = "pwl-sym-m2"
"#;
        let cfg = FileConfig::parse(text).unwrap();
        assert!(cfg.single_experiment().is_err());
    }
}

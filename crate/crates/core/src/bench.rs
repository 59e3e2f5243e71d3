//! Experiment orchestration: multi-trial training, frozen-policy testing,
//! aggregate statistics and plot-data export.
//!
//! A run trains one method on one environment over several independent
//! trials, then evaluates each trial's frozen policy (the incumbent genome,
//! or the greedy table) on a fresh batch of test episodes. Training and
//! test episodes draw from disjoint seed streams of the master seed.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::controllers::{Controller, ControllerFamily, ControllerSpec, Quantizer};
use crate::envs::{run_episode, Agent, EnvKind, EnvParams};
use crate::error::{Error, Result};
use crate::qlearn::{default_bins, train_qlbo, GreedyQ, GridDiscretizer, QTable, QlboHyperparams};
use crate::search::{
    cbrl_search, CbrlConfig, Checkpoint, FitnessConfig, GenerationRecord, SearchMethod,
    StopCriteria,
};
use crate::seeding::derive_seed;

/// One trained-and-tested method.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodConfig {
    Cbrl {
        controller: ControllerSpec,
        /// Defaults to the environment's standard quantizer.
        #[serde(default)]
        quantizer: Option<Quantizer>,
        #[serde(default)]
        fitness: FitnessConfig,
        #[serde(default)]
        search: SearchMethod,
        #[serde(default)]
        track_region_returns: bool,
        /// Held-out episodes for re-ranking the final population.
        #[serde(default)]
        validation_episodes: Option<usize>,
    },
    Qlbo {
        /// Defaults to the environment's standard grid.
        #[serde(default)]
        bins: Option<Vec<usize>>,
        #[serde(default)]
        hyperparams: QlboHyperparams,
    },
}

impl MethodConfig {
    pub fn default_label(&self) -> String {
        match self {
            MethodConfig::Cbrl { controller, .. } => match controller.family {
                ControllerFamily::Linear => "cbrl-linear".into(),
                ControllerFamily::Pwl => {
                    format!("cbrl-pwl-m{}", controller.partition.n_regions())
                }
                ControllerFamily::Nonlinear => "cbrl-nonlinear".into(),
            },
            MethodConfig::Qlbo { .. } => "qlbo".into(),
        }
    }
}

/// A full experiment: method, environment, budgets and the master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    /// Physics overrides; defaults when absent. Must match `env`.
    #[serde(default)]
    pub env_params: Option<EnvParams>,
    pub method: MethodConfig,
    pub trials: usize,
    pub train_episodes: u64,
    pub test_episodes: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub label: Option<String>,
}

impl ExperimentConfig {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.method.default_label())
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("experiment needs at least one trial"));
        }
        if self.test_episodes == 0 {
            return Err(Error::config("experiment needs at least one test episode"));
        }
        if let Some(params) = &self.env_params {
            if params.kind() != self.env {
                return Err(Error::config("env_params do not match the configured environment"));
            }
        }
        Ok(())
    }

    fn build_env(&self) -> Result<Box<dyn crate::envs::Environment>> {
        match &self.env_params {
            Some(params) => params.build(),
            None => Ok(self.env.build()),
        }
    }
}

/// Training curve, test scores and frozen policy of a single trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub training_curve: Vec<f64>,
    pub test_scores: Vec<f64>,
    /// Incumbent genome for controller-search trials.
    pub best_genome: Option<Vec<f64>>,
    /// Per-generation search history for controller-search trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_history: Option<Vec<GenerationRecord>>,
    /// Final optimizer snapshot for controller-search trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<Checkpoint>,
    /// Trained table for baseline trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_table: Option<QTable>,
}

impl TrialResult {
    /// Search history as CSV with a versioned header, when present.
    pub fn history_csv(&self) -> Option<String> {
        let history = self.search_history.as_ref()?;
        let mut out =
            String::from("# cbrl search history v1\ngeneration,episodes,best,mean,std\n");
        for rec in history {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                rec.generation, rec.episodes, rec.best, rec.mean, rec.std
            ));
        }
        Some(out)
    }
}

/// Aggregated results plus the resolved configuration that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    /// Mean over all test episodes of all trials.
    pub mean: f64,
    /// 1.96 * sample std / sqrt(n) over the same pool.
    pub ci_half_width: f64,
    /// First episode (1-based) at which the cross-trial mean training score
    /// reaches the environment's solve threshold.
    pub episodes_to_threshold: Option<usize>,
    pub wall_clock_secs: f64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Test scores of every trial, pooled in trial order.
    pub fn all_test_scores(&self) -> Vec<f64> {
        self.trials
            .iter()
            .flat_map(|t| t.test_scores.iter().copied())
            .collect()
    }
}

pub fn mean_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 divisor); zero for fewer than two
/// samples.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = mean_of(values);
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

/// Half-width of the 95% confidence interval for the mean.
pub fn ci_half_width(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    1.96 * sample_std(values) / (values.len() as f64).sqrt()
}

/// Trains and tests every trial sequentially. Equivalent to
/// [`run_experiment_with`] with a no-op observer.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(config, |_| Ok(()))
}

/// Runs the experiment, handing each finished trial to `on_trial` (so
/// partial results can be persisted before later trials run).
pub fn run_experiment_with(
    config: &ExperimentConfig,
    mut on_trial: impl FnMut(&TrialResult) -> Result<()>,
) -> Result<ExperimentReport> {
    config.validate()?;
    let started = Instant::now();
    let env = config.build_env()?;
    let mut trials = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let train_seed = derive_seed(config.master_seed, "train", &[trial as u64]);
        #[allow(clippy::type_complexity)]
        let (training_curve, agent, best_genome, search_history, checkpoint, q_table): (
            Vec<f64>,
            Box<dyn Agent>,
            Option<Vec<f64>>,
            Option<Vec<GenerationRecord>>,
            Option<Checkpoint>,
            Option<QTable>,
        ) = match &config.method {
                MethodConfig::Cbrl {
                    controller,
                    quantizer,
                    fitness,
                    search,
                    track_region_returns,
                    validation_episodes,
                } => {
                    let quantizer = quantizer.unwrap_or_else(|| Quantizer::for_env(config.env));
                    let cbrl = CbrlConfig {
                        fitness: *fitness,
                        method: search.clone(),
                        stop: StopCriteria::max_episodes(config.train_episodes),
                        initial_genome: None,
                        track_region_returns: *track_region_returns,
                        validation_episodes: *validation_episodes,
                    };
                    let result = cbrl_search(env.as_ref(), controller, quantizer, &cbrl, train_seed)?;
                    let frozen = Controller::new(
                        controller.clone(),
                        result.best_genome.clone(),
                        quantizer,
                    )?;
                    (
                        result.episode_log,
                        Box::new(frozen),
                        Some(result.best_genome),
                        Some(result.history),
                        Some(result.checkpoint),
                        None,
                    )
                }
                MethodConfig::Qlbo { bins, hyperparams } => {
                    let bins = bins.clone().unwrap_or_else(|| default_bins(config.env));
                    let discretizer = GridDiscretizer::for_env(env.spec(), &bins)?;
                    let (table, curve) = train_qlbo(
                        env.as_ref(),
                        &discretizer,
                        hyperparams,
                        config.train_episodes as usize,
                        train_seed,
                    )?;
                    let agent = GreedyQ::new(table.clone(), discretizer)?;
                    (curve, Box::new(agent), None, None, None, Some(table))
                }
            };

        let mut test_scores = Vec::with_capacity(config.test_episodes);
        for episode in 0..config.test_episodes {
            let seed = derive_seed(config.master_seed, "test", &[trial as u64, episode as u64]);
            test_scores.push(run_episode(env.as_ref(), agent.as_ref(), seed, false)?.total_reward);
        }
        let result = TrialResult {
            trial,
            training_curve,
            test_scores,
            best_genome,
            search_history,
            checkpoint,
            q_table,
        };
        on_trial(&result)?;
        trials.push(result);
    }

    let pooled: Vec<f64> = trials.iter().flat_map(|t| t.test_scores.clone()).collect();
    let threshold = config.env.solve_threshold();
    let episodes_to_threshold = cross_trial_mean(&trials)
        .iter()
        .position(|&m| m >= threshold)
        .map(|i| i + 1);
    Ok(ExperimentReport {
        mean: mean_of(&pooled),
        ci_half_width: ci_half_width(&pooled),
        episodes_to_threshold,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        config: config.clone(),
        trials,
    })
}

/// Per-episode mean across trials, truncated to the shortest curve.
fn cross_trial_mean(trials: &[TrialResult]) -> Vec<f64> {
    let len = trials
        .iter()
        .map(|t| t.training_curve.len())
        .min()
        .unwrap_or(0);
    (0..len)
        .map(|i| mean_of(&trials.iter().map(|t| t.training_curve[i]).collect::<Vec<_>>()))
        .collect()
}

/// One row of a method comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub mean: f64,
    pub ci_half_width: f64,
    pub episodes_to_threshold: Option<usize>,
}

/// Methods on a shared environment, ordered best mean first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub env: EnvKind,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# cbrl bench comparison v1\nmethod,mean,ci_half_width,episodes_to_threshold\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.label,
                row.mean,
                row.ci_half_width,
                row.episodes_to_threshold.map_or(String::new(), |e| e.to_string())
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("environment: {}\n", self.env.name());
        out.push_str(&format!(
            "{:<18} {:>12} {:>12} {:>22}\n",
            "method", "mean", "ci95", "episodes-to-threshold"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<18} {:>12.3} {:>12.3} {:>22}\n",
                row.label,
                row.mean,
                row.ci_half_width,
                row.episodes_to_threshold
                    .map_or("-".into(), |e| e.to_string())
            ));
        }
        out
    }
}

/// Ranks reports that share an environment by mean test score.
pub fn compare(reports: &[ExperimentReport]) -> Result<Comparison> {
    let first = reports
        .first()
        .ok_or_else(|| Error::invalid("cannot compare an empty report list"))?;
    let env = first.config.env;
    if reports.iter().any(|r| r.config.env != env) {
        return Err(Error::invalid("compared reports must share an environment"));
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            label: r.config.label(),
            mean: r.mean,
            ci_half_width: r.ci_half_width,
            episodes_to_threshold: r.episodes_to_threshold,
        })
        .collect();
    rows.sort_by(|a, b| b.mean.partial_cmp(&a.mean).expect("means are finite"));
    Ok(Comparison { env, rows })
}

/// Cross-trial training curve as CSV: per-episode mean, a trailing rolling
/// mean over `window` episodes, and the across-trial standard deviation.
pub fn training_curve_export(report: &ExperimentReport, window: usize) -> Result<String> {
    if window == 0 {
        return Err(Error::invalid("smoothing window must be at least 1"));
    }
    let raw = cross_trial_mean(&report.trials);
    let len = raw.len();
    let stds: Vec<f64> = (0..len)
        .map(|i| {
            let column: Vec<f64> = report
                .trials
                .iter()
                .map(|t| t.training_curve[i])
                .collect();
            // population std across trials; descriptive, zero for one trial
            let mean = mean_of(&column);
            (column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / column.len() as f64).sqrt()
        })
        .collect();
    let mut out = String::from("# cbrl bench curve v1\nepisode,raw_mean,smoothed_mean,std\n");
    for i in 0..len {
        let from = (i + 1).saturating_sub(window);
        let smoothed = mean_of(&raw[from..=i]);
        out.push_str(&format!("{},{},{},{}\n", i + 1, raw[i], smoothed, stds[i]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::DeConfig;

    fn tiny_cbrl_config() -> ExperimentConfig {
        ExperimentConfig {
            env: EnvKind::MountainCar,
            env_params: None,
            method: MethodConfig::Cbrl {
                controller: ControllerSpec::linear(2, 1),
                quantizer: None,
                fitness: FitnessConfig {
                    episodes_per_eval: 1,
                    ..FitnessConfig::default()
                },
                search: SearchMethod::De(DeConfig {
                    np: 5,
                    ..DeConfig::default()
                }),
                track_region_returns: false,
                validation_episodes: None,
            },
            trials: 2,
            train_episodes: 20,
            test_episodes: 3,
            master_seed: 11,
            label: None,
        }
    }

    #[test]
    fn ci_matches_hand_computed_case() {
        let scores = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((mean_of(&scores) - 3.0).abs() < 1e-15);
        assert!((sample_std(&scores) - 1.5811388300841898).abs() < 1e-15);
        assert!((ci_half_width(&scores) - 1.3859292911256333).abs() < 1e-12);
    }

    #[test]
    fn single_sample_has_zero_ci() {
        assert_eq!(ci_half_width(&[42.0]), 0.0);
        assert_eq!(ci_half_width(&[7.0, 7.0, 7.0]), 0.0);
    }

    #[test]
    fn single_trial_single_episode_report() {
        let mut config = tiny_cbrl_config();
        config.trials = 1;
        config.test_episodes = 1;
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.trials.len(), 1);
        assert_eq!(report.trials[0].test_scores.len(), 1);
        assert_eq!(report.mean, report.trials[0].test_scores[0]);
        assert_eq!(report.ci_half_width, 0.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let config = tiny_cbrl_config();
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.ci_half_width, b.ci_half_width);
        assert_eq!(
            training_curve_export(&a, 5).unwrap(),
            training_curve_export(&b, 5).unwrap()
        );
    }

    #[test]
    fn qlbo_runs_end_to_end() {
        let config = ExperimentConfig {
            env: EnvKind::MountainCar,
            env_params: None,
            method: MethodConfig::Qlbo {
                bins: Some(vec![8, 8]),
                hyperparams: QlboHyperparams::default(),
            },
            trials: 1,
            train_episodes: 10,
            test_episodes: 2,
            master_seed: 5,
            label: None,
        };
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.trials[0].training_curve.len(), 10);
        assert!(report.trials[0].best_genome.is_none());
        assert_eq!(report.config.label(), "qlbo");
    }

    #[test]
    fn comparison_orders_by_mean() {
        let config = tiny_cbrl_config();
        let mut a = run_experiment(&config).unwrap();
        let mut b = a.clone();
        a.mean = 200.0;
        a.config.label = Some("strong".into());
        b.mean = 189.2;
        b.config.label = Some("weak".into());
        let cmp = compare(&[b.clone(), a.clone()]).unwrap();
        assert_eq!(cmp.rows[0].label, "strong");
        assert_eq!(cmp.rows[1].label, "weak");
        assert!(cmp.to_csv().starts_with("# cbrl bench comparison v1\n"));
    }

    #[test]
    fn comparison_rejects_mixed_envs_and_empty_lists() {
        assert!(compare(&[]).is_err());
        let config = tiny_cbrl_config();
        let a = run_experiment(&config).unwrap();
        let mut b = a.clone();
        b.config.env = EnvKind::CartPole;
        assert!(compare(&[a, b]).is_err());
    }

    #[test]
    fn curve_export_window_one_is_identity() {
        let config = tiny_cbrl_config();
        let report = run_experiment(&config).unwrap();
        let csv = training_curve_export(&report, 1).unwrap();
        for line in csv.lines().skip(2) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[1], fields[2]);
        }
        assert!(training_curve_export(&report, 0).is_err());
    }

    #[test]
    fn constant_curves_have_zero_std() {
        let config = tiny_cbrl_config();
        let mut report = run_experiment(&config).unwrap();
        for t in &mut report.trials {
            t.training_curve = vec![-200.0; 8];
        }
        let csv = training_curve_export(&report, 3).unwrap();
        for line in csv.lines().skip(2) {
            assert!(line.ends_with(",0"), "std must be zero: {line}");
        }
    }

    #[test]
    fn report_json_roundtrip() {
        let config = tiny_cbrl_config();
        let report = run_experiment(&config).unwrap();
        let back = ExperimentReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back.mean, report.mean);
        assert_eq!(back.all_test_scores(), report.all_test_scores());
    }

    #[test]
    fn train_and_test_seed_streams_are_disjoint() {
        use crate::seeding::derive_seed;
        use std::collections::HashSet;
        let master = 20240;
        let mut train = HashSet::new();
        for trial in 0..50u64 {
            train.insert(derive_seed(master, "train", &[trial]));
        }
        for trial in 0..50u64 {
            for episode in 0..1000u64 {
                assert!(!train.contains(&derive_seed(master, "test", &[trial, episode])));
            }
        }
    }

    #[test]
    fn trial_observer_sees_partial_results() {
        let config = tiny_cbrl_config();
        let mut seen = Vec::new();
        run_experiment_with(&config, |t| {
            seen.push(t.trial);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![0, 1]);
    }
}

//! `cbrl` command-line driver.
//!
//! Subcommands:
//! - `train`: run one method from a config file, writing the report,
//!   training curve, per-trial genomes and checkpoints to the output dir.
//! - `bench`: run the controller search and the Q-learning baseline from
//!   the same config and print a ranked comparison.
//! - `mdp-check`: run the randomized operator verification suite; exits
//!   nonzero if any check fails.
//! - `eval`: score a frozen genome over fresh episodes, optionally dumping
//!   the first episode's trace as CSV.

mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use cbrl_core::bench::{compare, run_experiment_with, training_curve_export, ExperimentReport};
use cbrl_core::controllers::Controller;
use cbrl_core::envs::run_episode;
use cbrl_core::mdp::suite::{run_suite, SuiteConfig};
use cbrl_core::seeding::derive_seed;

use config::FileConfig;

#[derive(Parser)]
#[command(name = "cbrl", version, about = "Controller search vs tabular Q-learning on classic control tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one method and persist its report.
    Train(TrainArgs),
    /// Train both configured methods and print a comparison table.
    Bench(TrainArgs),
    /// Run the MDP operator verification suite.
    MdpCheck(MdpCheckArgs),
    /// Evaluate a frozen genome on fresh episodes.
    Eval(EvalArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to $CBRL_OUT_DIR or ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the config's training budget.
    #[arg(long)]
    train_episodes: Option<u64>,
    /// Override the config's test episode count.
    #[arg(long)]
    test_episodes: Option<usize>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Smoothing window for the exported training curve.
    #[arg(long, default_value_t = 100)]
    curve_window: usize,
}

#[derive(Args)]
struct MdpCheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instance count for the contraction and operator-bound checks.
    #[arg(long, default_value_t = 1000)]
    contraction_instances: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Experiment config naming the environment and controller shape.
    #[arg(long)]
    config: PathBuf,
    /// Genome file: a JSON array of free parameters.
    #[arg(long)]
    genome: PathBuf,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the first episode's trace to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train(args) => train(args),
        Command::Bench(args) => bench(args),
        Command::MdpCheck(args) => mdp_check(args),
        Command::Eval(args) => eval(args),
    }
}

fn out_dir(args: &TrainArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os("CBRL_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_config(args: &TrainArgs) -> anyhow::Result<FileConfig> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    FileConfig::parse(&text)
}

fn apply_overrides(exp: &mut cbrl_core::bench::ExperimentConfig, args: &TrainArgs) {
    if let Some(t) = args.trials {
        exp.trials = t;
    }
    if let Some(e) = args.train_episodes {
        exp.train_episodes = e;
    }
    if let Some(e) = args.test_episodes {
        exp.test_episodes = e;
    }
    if let Some(s) = args.seed {
        exp.master_seed = s;
    }
}

fn run_one(
    exp: &cbrl_core::bench::ExperimentConfig,
    dir: &Path,
    curve_window: usize,
) -> anyhow::Result<ExperimentReport> {
    fs::create_dir_all(dir)?;
    let label = exp.label();
    let report = run_experiment_with(exp, |trial| {
        // persist each trial as it completes so a failed run leaves data
        let t = trial.trial;
        let path = dir.join(format!("{label}_trial_{t}.json"));
        fs::write(&path, serde_json::to_string_pretty(trial)?)?;
        if let Some(genome) = &trial.best_genome {
            fs::write(
                dir.join(format!("{label}_trial_{t}_genome.json")),
                serde_json::to_string(genome)?,
            )?;
        }
        if let Some(history) = trial.history_csv() {
            fs::write(dir.join(format!("{label}_trial_{t}_history.csv")), history)?;
        }
        if let Some(checkpoint) = &trial.checkpoint {
            fs::write(
                dir.join(format!("{label}_trial_{t}_checkpoint.json")),
                checkpoint.to_json()?,
            )?;
        }
        if let Some(table) = &trial.q_table {
            fs::write(
                dir.join(format!("{label}_trial_{t}_qtable.json")),
                table.to_json()?,
            )?;
        }
        Ok(())
    })?;
    fs::write(dir.join(format!("{label}_report.json")), report.to_json()?)?;
    fs::write(
        dir.join(format!("{label}_curve.csv")),
        training_curve_export(&report, curve_window)?,
    )?;
    println!(
        "{label}: mean={:.3} ci95={:.3} episodes-to-threshold={} ({:.1}s)",
        report.mean,
        report.ci_half_width,
        report
            .episodes_to_threshold
            .map_or("-".into(), |e| e.to_string()),
        report.wall_clock_secs
    );
    Ok(report)
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args)?;
    let mut exp = cfg.single_experiment()?;
    apply_overrides(&mut exp, &args);
    let dir = out_dir(&args);
    run_one(&exp, &dir, args.curve_window)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn bench(args: TrainArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args)?;
    let (mut cbrl, mut qlbo) = cfg.paired_experiments()?;
    apply_overrides(&mut cbrl, &args);
    apply_overrides(&mut qlbo, &args);
    let dir = out_dir(&args);
    let a = run_one(&cbrl, &dir, args.curve_window)?;
    let b = run_one(&qlbo, &dir, args.curve_window)?;
    let comparison = compare(&[a, b])?;
    fs::write(dir.join("comparison.csv"), comparison.to_csv())?;
    print!("{}", comparison.to_text());
    println!("wrote {}", dir.display());
    Ok(())
}

fn mdp_check(args: MdpCheckArgs) -> anyhow::Result<()> {
    let cfg = SuiteConfig {
        seed: args.seed,
        contraction_instances: args.contraction_instances,
        ..SuiteConfig::default()
    };
    let results = run_suite(&cfg)?;
    let mut all = true;
    for r in &results {
        println!("{}", r.line());
        all &= r.passed;
    }
    if !all {
        std::process::exit(1);
    }
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let cfg = FileConfig::parse(&text)?;
    let (spec, quantizer) = cfg.controller()?;
    let genome: Vec<f64> = serde_json::from_str(
        &fs::read_to_string(&args.genome)
            .with_context(|| format!("reading {}", args.genome.display()))?,
    )?;
    let controller = Controller::new(spec, genome, quantizer)?;
    let env = match cfg.env_params()? {
        Some(p) => p.build()?,
        None => cfg.env_kind()?.build(),
    };

    let mut scores = Vec::with_capacity(args.episodes);
    for episode in 0..args.episodes {
        let seed = derive_seed(args.seed, "eval", &[episode as u64]);
        let record = args.trace.is_some() && episode == 0;
        let outcome = run_episode(env.as_ref(), &controller, seed, record)?;
        if let (Some(path), Some(csv)) = (&args.trace, outcome.trace_csv()) {
            fs::write(path, csv)?;
        }
        scores.push(outcome.total_reward);
    }
    let mean = cbrl_core::bench::mean_of(&scores);
    let ci = cbrl_core::bench::ci_half_width(&scores);
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    println!(
        "episodes={} mean={mean:.3} ci95={ci:.3} min={lo:.3} max={hi:.3}",
        scores.len()
    );
    Ok(())
}

//! Operator surface: resolve a run configuration from flags, an optional
//! JSON config file and built-in defaults (flag > file > default), then
//! execute one command and emit its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::learner::{self, Hyperparameters, TrainingReport};
use crate::oracle::{self, SamplingMode};
use crate::predictor::{self, ColorQuad, ObjectiveSpec, PredictorSource};
use crate::{Grid64, Hyperparameters64, ObjectiveSpec64, PredictorSource64};

#[derive(Debug, Parser)]
#[command(
    name = "fadeopt",
    about = "Q-learning recipe optimization over a discretized parameter lattice",
    version
)]
pub struct CliArgs {
    #[command(subcommand)]
    pub command: CommandKind,
}

#[derive(Debug, Subcommand)]
pub enum CommandKind {
    /// Train a Q-learning agent and write report, curve and Q-table files.
    Train(CommonArgs),
    /// Exhaustively evaluate every lattice state and report the optimum
    /// and objective distribution.
    Oracle(CommonArgs),
    /// Uniform random sampling baseline.
    RandomSearch(CommonArgs),
    /// Best-improvement hill-climbing baseline from a seeded random start.
    HillClimb(CommonArgs),
    /// Train, then print the recommended recipe on one line.
    Recommend(CommonArgs),
}

impl CommandKind {
    fn name(&self) -> &'static str {
        match self {
            CommandKind::Train(_) => "train",
            CommandKind::Oracle(_) => "oracle",
            CommandKind::RandomSearch(_) => "random-search",
            CommandKind::HillClimb(_) => "hill-climb",
            CommandKind::Recommend(_) => "recommend",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            CommandKind::Train(c)
            | CommandKind::Oracle(c)
            | CommandKind::RandomSearch(c)
            | CommandKind::HillClimb(c)
            | CommandKind::Recommend(c) => c,
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Targeted color as four comma-separated reals: k/s,L,a,b
    #[arg(long)]
    pub target: Option<String>,

    /// Objective weights as four comma-separated non-negative reals
    #[arg(long)]
    pub weights: Option<String>,

    /// Grid configuration JSON (ordered array of {name, min, max, step});
    /// the built-in paper grid is used when absent
    #[arg(long)]
    pub grid: Option<PathBuf>,

    /// Predictor selector: `reference` or `table:<path>`
    #[arg(long)]
    pub predictor: Option<String>,

    /// Optional JSON config file; flags take precedence over its fields
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub episodes: Option<usize>,

    #[arg(long)]
    pub steps: Option<usize>,

    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long)]
    pub gamma: Option<f64>,

    #[arg(long)]
    pub epsilon: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Inclusive seed range `a..b` for a sweep of independent runs
    #[arg(long)]
    pub seeds: Option<String>,

    /// Sample budget for random-search (default: episodes * steps)
    #[arg(long)]
    pub budget: Option<usize>,

    /// Report JSON output path
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Learning-curve CSV output path
    #[arg(long)]
    pub curve: Option<PathBuf>,

    /// Q-table persistence path
    #[arg(long)]
    pub qtable: Option<PathBuf>,
}

/// JSON config file fields; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    target: Option<[f64; 4]>,
    weights: Option<[f64; 4]>,
    grid: Option<PathBuf>,
    predictor: Option<String>,
    episodes: Option<usize>,
    steps: Option<usize>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    seeds: Option<String>,
    budget: Option<usize>,
    report: Option<PathBuf>,
    curve: Option<PathBuf>,
    qtable: Option<PathBuf>,
}

/// Fully resolved configuration, echoed into every report for provenance.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub grid: Option<PathBuf>,
    pub predictor: String,
    pub target: [f64; 4],
    pub weights: [f64; 4],
    pub hyperparameters: Hyperparameters64,
    pub seeds: Option<(u64, u64)>,
    pub budget: Option<usize>,
    pub report: Option<PathBuf>,
    pub curve: Option<PathBuf>,
    pub qtable: Option<PathBuf>,
}

fn parse_quad(flag: &str, text: &str) -> Result<[f64; 4]> {
    let parts: Vec<&str> = text.split(',').collect();
    let bad = || Error::InvalidHyperparameter {
        name: Box::leak(format!("--{flag}").into_boxed_str()),
        value: text.to_string(),
        range: "four comma-separated reals",
    };
    if parts.len() != 4 {
        return Err(bad());
    }
    let mut out = [0.0; 4];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part.trim().parse().map_err(|_| bad())?;
    }
    Ok(out)
}

fn parse_seed_range(text: &str) -> Result<(u64, u64)> {
    let bad = || Error::InvalidHyperparameter {
        name: "--seeds",
        value: text.to_string(),
        range: "a..b with a <= b",
    };
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// Resolve flags, config file and defaults into a [`RunConfig`].
pub fn resolve_config(command: &CommandKind) -> Result<RunConfig> {
    let args = command.common();
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: e.line(),
                reason: e.to_string(),
            })?
        }
        None => FileConfig::default(),
    };

    let target = match (&args.target, file.target) {
        (Some(text), _) => parse_quad("target", text)?,
        (None, Some(quad)) => quad,
        (None, None) => {
            return Err(Error::InvalidHyperparameter {
                name: "--target",
                value: "(missing)".to_string(),
                range: "required: k/s,L,a,b",
            })
        }
    };
    let weights = match (&args.weights, file.weights) {
        (Some(text), _) => parse_quad("weights", text)?,
        (None, Some(quad)) => quad,
        (None, None) => [1.0; 4],
    };

    let defaults = Hyperparameters64::default();
    let hp = Hyperparameters {
        episodes: args.episodes.or(file.episodes).unwrap_or(defaults.episodes),
        steps_per_episode: args.steps.or(file.steps).unwrap_or(defaults.steps_per_episode),
        alpha: args.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        gamma: args.gamma.or(file.gamma).unwrap_or(defaults.gamma),
        epsilon: args.epsilon.or(file.epsilon).unwrap_or(defaults.epsilon),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    hp.validate()?;

    let seeds = match args.seeds.as_deref().or(file.seeds.as_deref()) {
        Some(text) => Some(parse_seed_range(text)?),
        None => None,
    };

    Ok(RunConfig {
        command: command.name().to_string(),
        grid: args.grid.clone().or(file.grid),
        predictor: args
            .predictor
            .clone()
            .or(file.predictor)
            .unwrap_or_else(|| "reference".to_string()),
        target,
        weights,
        hyperparameters: hp,
        seeds,
        budget: args.budget.or(file.budget),
        report: args.report.clone().or(file.report),
        curve: args.curve.clone().or(file.curve),
        qtable: args.qtable.clone().or(file.qtable),
    })
}

/// Tracks files written during a command so that a failure removes
/// partial outputs.
struct OutputGuard {
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    fn new() -> Self {
        Self {
            written: Vec::new(),
            committed: false,
        }
    }

    fn record(&mut self, path: &Path) {
        self.written.push(path.to_path_buf());
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.written {
                let _ = fs::remove_file(path);
            }
        }
    }
}

fn build_grid(config: &RunConfig) -> Result<Grid64> {
    match &config.grid {
        Some(path) => Grid64::load(path),
        None => Ok(Grid64::default_paper_grid()),
    }
}

fn build_predictor(config: &RunConfig, grid: &Grid64) -> Result<PredictorSource64> {
    if config.predictor == "reference" {
        Ok(PredictorSource::Reference)
    } else if let Some(path) = config.predictor.strip_prefix("table:") {
        let load = predictor::load_table(path, grid)?;
        if load.duplicates > 0 {
            eprintln!(
                "warning: prediction table {path}: {} duplicate state rows (last row wins)",
                load.duplicates
            );
        }
        Ok(load.source)
    } else {
        Err(Error::InvalidHyperparameter {
            name: "--predictor",
            value: config.predictor.clone(),
            range: "`reference` or `table:<path>`",
        })
    }
}

fn build_objective(config: &RunConfig) -> Result<ObjectiveSpec64> {
    let [ks, l, a, b] = config.target;
    ObjectiveSpec::with_weights(ColorQuad::new(ks, l, a, b), config.weights)
}

#[derive(Serialize)]
struct TrainReportFile {
    config: RunConfig,
    training: TrainingReport<f64>,
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    best_state_raw: Vec<f64>,
    best_objective: f64,
    wall_time_secs: f64,
}

#[derive(Serialize)]
struct SweepReportFile {
    config: RunConfig,
    runs: Vec<SeedSummary>,
}

#[derive(Serialize)]
struct OracleReportFile {
    config: RunConfig,
    oracle: oracle::OracleReport<f64>,
}

#[derive(Serialize)]
struct BaselineReportFile {
    config: RunConfig,
    best_state_raw: Vec<f64>,
    best_objective: f64,
    wall_time_secs: f64,
}

fn write_json(guard: &mut OutputGuard, path: &Path, value: &impl Serialize) -> Result<()> {
    guard.record(path);
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn write_curve(guard: &mut OutputGuard, path: &Path, report: &TrainingReport<f64>) -> Result<()> {
    guard.record(path);
    let mut text = String::from("episode,best_f,episode_reward,blocked_steps\n");
    for row in &report.curve {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            row.episode, row.best_f, row.episode_reward, row.blocked_steps
        );
    }
    fs::write(path, text)?;
    Ok(())
}

fn format_recipe(grid: &Grid64, raw: &[f64]) -> String {
    grid.dims()
        .iter()
        .zip(raw)
        .map(|(d, v)| format!("{}={v}", d.name))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run_training(
    config: &RunConfig,
    grid: &Grid64,
    source: &PredictorSource64,
    spec: &ObjectiveSpec64,
    guard: &mut OutputGuard,
) -> Result<TrainingReport<f64>> {
    let report = if let Some((lo, hi)) = config.seeds {
        let mut runs = Vec::new();
        let mut best: Option<TrainingReport<f64>> = None;
        for seed in lo..=hi {
            let hp = Hyperparameters {
                seed,
                ..config.hyperparameters.clone()
            };
            let env = Environment::new(grid, source, spec);
            let (_, rep) = learner::train(&env, &hp)?;
            runs.push(SeedSummary {
                seed,
                best_state_raw: rep.best_state_raw.clone(),
                best_objective: rep.best_objective,
                wall_time_secs: rep.wall_time_secs,
            });
            if best
                .as_ref()
                .is_none_or(|b| rep.best_objective < b.best_objective)
            {
                best = Some(rep);
            }
        }
        if let Some(path) = &config.report {
            write_json(
                guard,
                path,
                &SweepReportFile {
                    config: config.clone(),
                    runs,
                },
            )?;
        }
        best.expect("seed range is non-empty")
    } else {
        let env = Environment::new(grid, source, spec);
        let (qtable, report) = learner::train(&env, &config.hyperparameters)?;
        if let Some(path) = &config.report {
            write_json(
                guard,
                path,
                &TrainReportFile {
                    config: config.clone(),
                    training: report.clone(),
                },
            )?;
        }
        if let Some(path) = &config.curve {
            write_curve(guard, path, &report)?;
        }
        if let Some(path) = &config.qtable {
            guard.record(path);
            learner::save_qtable(path, &qtable, &config.hyperparameters)?;
        }
        report
    };
    Ok(report)
}

/// Execute one parsed command. Returns the process exit status.
pub fn run(args: CliArgs) -> Result<()> {
    let config = resolve_config(&args.command)?;
    let grid = build_grid(&config)?;
    let source = build_predictor(&config, &grid)?;
    let spec = build_objective(&config)?;
    let mut guard = OutputGuard::new();

    match &args.command {
        CommandKind::Train(_) => {
            let report = run_training(&config, &grid, &source, &spec, &mut guard)?;
            println!(
                "best {} objective {}",
                format_recipe(&grid, &report.best_state_raw),
                report.best_objective
            );
        }
        CommandKind::Recommend(_) => {
            let report = run_training(&config, &grid, &source, &spec, &mut guard)?;
            println!("{}", format_recipe(&grid, &report.best_state_raw));
        }
        CommandKind::Oracle(_) => {
            let started = Instant::now();
            let result = oracle::brute_force(&grid, &source, &spec)?;
            let report = result.report(&grid, started.elapsed().as_secs_f64())?;
            if let Some(path) = &config.report {
                write_json(
                    &mut guard,
                    path,
                    &OracleReportFile {
                        config: config.clone(),
                        oracle: report.clone(),
                    },
                )?;
            }
            println!(
                "optimum {} objective {}",
                format_recipe(&grid, &report.optimum_raw),
                report.optimum_objective
            );
        }
        CommandKind::RandomSearch(_) => {
            let hp = &config.hyperparameters;
            let budget = config
                .budget
                .unwrap_or(hp.episodes.max(1) * hp.steps_per_episode);
            let started = Instant::now();
            let (state, best) = oracle::random_search(
                &grid,
                &source,
                &spec,
                budget,
                hp.seed,
                SamplingMode::WithReplacement,
            )?;
            let raw = grid.raw_values(&state)?;
            if let Some(path) = &config.report {
                write_json(
                    &mut guard,
                    path,
                    &BaselineReportFile {
                        config: config.clone(),
                        best_state_raw: raw.clone(),
                        best_objective: best,
                        wall_time_secs: started.elapsed().as_secs_f64(),
                    },
                )?;
            }
            println!("best {} objective {best}", format_recipe(&grid, &raw));
        }
        CommandKind::HillClimb(_) => {
            use rand::SeedableRng;
            let started = Instant::now();
            let env = Environment::new(&grid, &source, &spec);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.hyperparameters.seed);
            let start = env.random_initial_state(&mut rng);
            let (state, best) = oracle::hill_climb(&grid, &source, &spec, &start)?;
            let raw = grid.raw_values(&state)?;
            if let Some(path) = &config.report {
                write_json(
                    &mut guard,
                    path,
                    &BaselineReportFile {
                        config: config.clone(),
                        best_state_raw: raw.clone(),
                        best_objective: best,
                        wall_time_secs: started.elapsed().as_secs_f64(),
                    },
                )?;
            }
            println!("best {} objective {best}", format_recipe(&grid, &raw));
        }
    }
    guard.commit();
    Ok(())
}

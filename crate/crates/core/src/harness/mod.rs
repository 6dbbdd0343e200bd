//! Train, evaluate and compare agents; run directories hold `log.csv`,
//! `final.ckpt` and `curve.svg`.

pub mod checkpoint;
pub mod runlog;
pub mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::es::{apply_update, evaluate_candidate, evaluate_generation, initial_center, EsConfig, EsState, GenerationStats};
use crate::policy::{Agent, AgentConfig};
use crate::rng::derive_seed;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use runlog::{LogRow, RunLog};

pub const LOG_FILE: &str = "log.csv";
pub const CHECKPOINT_FILE: &str = "final.ckpt";
pub const CURVE_FILE: &str = "curve.svg";
pub const THREADS_ENV: &str = "COOP_THREADS";
/// Standard deviation of the initial genome. Smaller values leave the pooled
/// message nearly state-independent and ES converges to a constant push.
pub const DEFAULT_INIT_SCALE: f64 = 1.0;

/// Worker count from `COOP_THREADS`, else the available parallelism.
pub fn worker_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn build_pool(threads: usize) -> Result<Option<ThreadPool>> {
    if threads <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub agent: AgentConfig,
    pub es: EsConfig,
    pub init_scale: f64,
    pub threads: usize,
    pub out: PathBuf,
}

impl TrainOptions {
    pub fn new(agent: AgentConfig, es: EsConfig, out: impl Into<PathBuf>) -> Self {
        TrainOptions {
            agent,
            es,
            init_scale: DEFAULT_INIT_SCALE,
            threads: worker_threads(),
            out: out.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: RunLog,
    pub checkpoint: Checkpoint,
}

/// Runs `es.iterations` ES updates and evaluates `iterations + 1`
/// generations (the last one only for the log), then writes the run
/// directory.
pub fn train(opts: &TrainOptions) -> Result<TrainOutcome> {
    opts.agent.layer.validate()?;
    opts.es.validate()?;
    create_dir(&opts.out)?;
    let pool = build_pool(opts.threads)?;
    let agent = opts.agent;
    let episodes = opts.es.episodes_per_eval;
    let fitness = move |genome: &[f64], seed: u64| evaluate_candidate(genome, &agent, episodes, seed);

    let started = Instant::now();
    let mut state = EsState::new(
        initial_center(agent.genome_len(), opts.es.base_seed, opts.init_scale),
        opts.es.base_seed,
    );
    let mut log = RunLog::default();
    let per_generation = (opts.es.population * episodes) as u64;
    for iter in 0..=opts.es.iterations {
        let generation = evaluate_generation(&state, &opts.es, &fitness, pool.as_ref())?;
        let stats = GenerationStats::from_fitness(&generation.fitness);
        log.rows.push(LogRow {
            iter,
            best: stats.best,
            mean: stats.mean,
            std: stats.std,
            evals: iter as u64 * per_generation,
            wallclock_ms: started.elapsed().as_millis() as u64,
        });
        if iter < opts.es.iterations {
            state = apply_update(&state, &opts.es, &generation)?;
        }
    }

    let checkpoint = Checkpoint {
        agent,
        es: opts.es,
        init_scale: opts.init_scale,
        iteration: state.iteration,
        genome: state.center,
    };
    log.write(&opts.out.join(LOG_FILE))?;
    save_checkpoint(&opts.out.join(CHECKPOINT_FILE), &checkpoint)?;
    let title = format!("{} (seed {})", agent.layer.kind, opts.es.base_seed);
    let svg = svg::line_chart(&title, "ES generation", "fitness", &curve_series(&log, &agent.layer.kind.to_string(), 0));
    write_file(&opts.out.join(CURVE_FILE), &svg)?;
    Ok(TrainOutcome { log, checkpoint })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn curve_series(log: &RunLog, label: &str, color_index: usize) -> Vec<svg::Series> {
    let color = svg::PALETTE[color_index % svg::PALETTE.len()].to_string();
    let xs = log.rows.iter().map(|r| r.iter as f64);
    vec![
        svg::Series {
            label: format!("{label} best"),
            color: color.clone(),
            dashed: false,
            points: xs.clone().zip(log.rows.iter().map(|r| r.best)).collect(),
        },
        svg::Series {
            label: format!("{label} mean"),
            color,
            dashed: true,
            points: xs.zip(log.rows.iter().map(|r| r.mean)).collect(),
        },
    ]
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub checkpoint: PathBuf,
    pub episodes: usize,
    pub shuffle: bool,
    pub seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub layer: String,
    pub episodes: usize,
    pub shuffle: bool,
    pub seed: u64,
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

impl EvalReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: {:.3} ± {:.3} over {} episodes{}",
            self.layer,
            self.mean,
            self.std,
            self.episodes,
            if self.shuffle { " (shuffled)" } else { "" }
        )
    }
}

/// Episode returns of `genome`. Episode `k` uses seed `derive_seed([seed, k])`
/// for both the initial state and, with `shuffle`, its observation order, so
/// shuffled and unshuffled evaluations see the same dynamics.
pub fn episode_returns(
    agent: &AgentConfig,
    genome: &[f64],
    episodes: usize,
    seed: u64,
    shuffle: bool,
    threads: usize,
) -> Result<Vec<f64>> {
    let base = Agent::from_genome(agent, genome)?;
    let run = |k: usize| -> Result<f64> { base.clone().run_episode(derive_seed(&[seed, k as u64]), shuffle) };
    match build_pool(threads)? {
        Some(pool) => pool.install(|| (0..episodes).into_par_iter().map(run).collect()),
        None => (0..episodes).map(run).collect(),
    }
}

pub fn evaluate(opts: &EvalOptions) -> Result<EvalReport> {
    if opts.episodes == 0 {
        return Err(Error::InvalidConfig("at least one episode is required".into()));
    }
    let ckpt = load_checkpoint(&opts.checkpoint)?;
    let returns = episode_returns(&ckpt.agent, &ckpt.genome, opts.episodes, opts.seed, opts.shuffle, opts.threads)?;
    let stats = GenerationStats::from_fitness(&returns);
    let report = EvalReport {
        layer: ckpt.agent.layer.kind.to_string(),
        episodes: opts.episodes,
        shuffle: opts.shuffle,
        seed: opts.seed,
        mean: stats.mean,
        std: stats.std,
        returns,
    };
    if let Some(out) = &opts.out {
        write_file(out, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

/// One side of a comparison, loaded from a run directory.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub label: String,
    pub dir: PathBuf,
    pub genome_len: usize,
    pub layer_params: usize,
    pub log: RunLog,
}

impl RunSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        let ckpt = load_checkpoint(&dir.join(CHECKPOINT_FILE))?;
        let log = RunLog::read(&dir.join(LOG_FILE))?;
        Ok(RunSummary {
            label: format!("{} seed {}", ckpt.agent.layer.kind, ckpt.es.base_seed),
            dir: dir.to_path_buf(),
            genome_len: ckpt.genome.len(),
            layer_params: ckpt.agent.layer_param_count(),
            log,
        })
    }

    fn final_row(&self) -> Option<&LogRow> {
        self.log.rows.last()
    }
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub a: RunSummary,
    pub b: RunSummary,
    pub table: String,
}

/// Fails with [`Error::ParamCountMismatch`] unless both agents have the same
/// number of parameters.
pub fn check_parity(label_a: &str, a: &AgentConfig, label_b: &str, b: &AgentConfig) -> Result<()> {
    for (la, lb, what) in [
        (a.genome_len(), b.genome_len(), "genome"),
        (a.layer_param_count(), b.layer_param_count(), "sensory layer"),
    ] {
        if la != lb {
            return Err(Error::ParamCountMismatch {
                label_a: format!("{label_a} {what}"),
                count_a: la,
                label_b: format!("{label_b} {what}"),
                count_b: lb,
            });
        }
    }
    Ok(())
}

pub fn compare_runs(dir_a: &Path, dir_b: &Path, out: &Path) -> Result<CompareReport> {
    let a = RunSummary::load(dir_a)?;
    let b = RunSummary::load(dir_b)?;
    for (ca, cb, what) in [(a.genome_len, b.genome_len, "genome"), (a.layer_params, b.layer_params, "sensory layer")] {
        if ca != cb {
            return Err(Error::ParamCountMismatch {
                label_a: format!("{} {what}", a.label),
                count_a: ca,
                label_b: format!("{} {what}", b.label),
                count_b: cb,
            });
        }
    }
    create_dir(out)?;
    let mut series = curve_series(&a.log, &format!("A: {}", a.label), 0);
    series.extend(curve_series(&b.log, &format!("B: {}", b.label), 1));
    write_file(&out.join("compare.svg"), &svg::line_chart("training curves", "ES generation", "fitness", &series))?;

    let mut table = String::new();
    let _ = writeln!(table, "| run | parameters | layer parameters | generations | final best | best so far | final mean |");
    let _ = writeln!(table, "|---|---|---|---|---|---|---|");
    for (tag, run) in [("A", &a), ("B", &b)] {
        let last = run.final_row();
        let best_so_far = run.log.best_so_far().last().copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            table,
            "| {tag}: {} | {} | {} | {} | {:.3} | {:.3} | {:.3} |",
            run.label,
            run.genome_len,
            run.layer_params,
            last.map_or(0, |r| r.iter),
            last.map_or(f64::NAN, |r| r.best),
            best_so_far,
            last.map_or(f64::NAN, |r| r.mean),
        );
    }
    write_file(&out.join("compare.md"), &table)?;
    Ok(CompareReport { a, b, table })
}

/// Trains both configurations into `out/a` and `out/b`, then compares them.
/// Parity is checked before any training.
pub fn compare_train(a: &TrainOptions, b: &TrainOptions, out: &Path) -> Result<CompareReport> {
    check_parity(
        &a.agent.layer.kind.to_string(),
        &a.agent,
        &b.agent.layer.kind.to_string(),
        &b.agent,
    )?;
    train(a)?;
    train(b)?;
    compare_runs(&a.out, &b.out, out)
}

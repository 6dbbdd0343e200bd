use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use coop_core::es::EsConfig;
use coop_core::harness::{self, EvalOptions, TrainOptions};
use coop_core::layer::{ContextMixing, LayerKind};
use coop_core::modulation::ModulationKind;
use coop_core::policy::AgentConfig;

#[derive(Parser)]
#[command(name = "coop", version, about = "Train, evaluate and compare permutation-invariant cart-pole agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent with evolution strategies.
    Train(TrainArgs),
    /// Evaluate a checkpoint over a number of episodes.
    Eval(EvalArgs),
    /// Compare two runs (existing run directories or two fresh trainings).
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Env {
    Cartpole,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Layer {
    Cooperator,
    Transformer,
}

#[derive(Clone, Copy, ValueEnum)]
enum Modulation {
    Cooperation,
    Tm1,
    Tm2,
    Tm3,
    Tm4,
}

impl From<Modulation> for ModulationKind {
    fn from(m: Modulation) -> Self {
        match m {
            Modulation::Cooperation => ModulationKind::Cooperation,
            Modulation::Tm1 => ModulationKind::Tm1,
            Modulation::Tm2 => ModulationKind::Tm2,
            Modulation::Tm3 => ModulationKind::Tm3,
            Modulation::Tm4 => ModulationKind::Tm4,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mixing {
    Neighbormean,
    Rowwise,
}

#[derive(Args, Clone)]
struct EsArgs {
    #[arg(long, value_enum, default_value = "cartpole")]
    env: Env,
    /// ES generations.
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Population size (even).
    #[arg(long, default_value_t = 64)]
    pop: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long = "lr", default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 2)]
    episodes_per_eval: usize,
    /// Standard deviation of the initial genome.
    #[arg(long, default_value_t = harness::DEFAULT_INIT_SCALE)]
    init_scale: f64,
    #[arg(long, value_enum, default_value = "neighbormean")]
    mixing: Mixing,
}

impl EsArgs {
    fn es_config(&self) -> EsConfig {
        EsConfig {
            population: self.pop,
            sigma: self.sigma,
            learning_rate: self.learning_rate,
            iterations: self.iters,
            episodes_per_eval: self.episodes_per_eval,
            base_seed: self.seed,
        }
    }

    fn train_options(&self, layer: Layer, modulation: Option<Modulation>, out: PathBuf) -> Result<TrainOptions> {
        let Env::Cartpole = self.env;
        let kind = layer_kind(layer, modulation)?;
        let mut agent = AgentConfig::cartpole(kind);
        agent.layer.mixing = match self.mixing {
            Mixing::Neighbormean => ContextMixing::NeighborMean,
            Mixing::Rowwise => ContextMixing::Rowwise,
        };
        let mut opts = TrainOptions::new(agent, self.es_config(), out);
        opts.init_scale = self.init_scale;
        Ok(opts)
    }
}

fn layer_kind(layer: Layer, modulation: Option<Modulation>) -> Result<LayerKind> {
    Ok(match (layer, modulation) {
        (Layer::Cooperator, m) => LayerKind::Cooperator(m.unwrap_or(Modulation::Cooperation).into()),
        (Layer::Transformer, None) => LayerKind::Transformer,
        (Layer::Transformer, Some(_)) => bail!("--modulation only applies to --layer cooperator"),
    })
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    layer: Layer,
    /// Transfer function of a cooperator layer (default: cooperation).
    #[arg(long, value_enum)]
    modulation: Option<Modulation>,
    #[command(flatten)]
    es: EsArgs,
    /// Run directory to create.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Reorder observation components with a fresh random permutation per episode.
    #[arg(long)]
    shuffle: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// First run directory.
    #[arg(long, requires = "run_b", conflicts_with_all = ["layer_a", "layer_b"])]
    run_a: Option<PathBuf>,
    /// Second run directory.
    #[arg(long, requires = "run_a")]
    run_b: Option<PathBuf>,
    #[arg(long, value_enum, requires = "layer_b")]
    layer_a: Option<Layer>,
    #[arg(long, value_enum)]
    modulation_a: Option<Modulation>,
    #[arg(long, value_enum, requires = "layer_a")]
    layer_b: Option<Layer>,
    #[arg(long, value_enum)]
    modulation_b: Option<Modulation>,
    #[command(flatten)]
    es: EsArgs,
    /// Output directory for the overlay chart and score table.
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let opts = args.es.train_options(args.layer, args.modulation, args.out)?;
            let outcome = harness::train(&opts).context("training failed")?;
            let last = outcome.log.rows.last().expect("at least one generation");
            println!(
                "{}: {} parameters, generation {} best {:.3} mean {:.3}; wrote {}",
                opts.agent.layer.kind,
                opts.agent.genome_len(),
                last.iter,
                last.best,
                last.mean,
                opts.out.display()
            );
        }
        Command::Eval(args) => {
            let report = harness::evaluate(&EvalOptions {
                checkpoint: args.ckpt,
                episodes: args.episodes,
                shuffle: args.shuffle,
                seed: args.seed,
                threads: harness::worker_threads(),
                out: args.out,
            })?;
            println!("{}", report.summary());
        }
        Command::Compare(args) => {
            let report = match (args.run_a, args.run_b, args.layer_a, args.layer_b) {
                (Some(a), Some(b), None, None) => harness::compare_runs(&a, &b, &args.out)?,
                (None, None, Some(la), Some(lb)) => {
                    let a = args.es.train_options(la, args.modulation_a, args.out.join("a"))?;
                    let b = args.es.train_options(lb, args.modulation_b, args.out.join("b"))?;
                    harness::compare_train(&a, &b, &args.out)?
                }
                _ => bail!("give either --run-a/--run-b or --layer-a/--layer-b"),
            };
            print!("{}", report.table);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

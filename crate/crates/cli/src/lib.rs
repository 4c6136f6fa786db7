//! The `hdbo` command-line tool.
//!
//! Each subcommand resolves its settings (defaults, then `--config`, then
//! flags), runs, and writes plot-ready CSV plus a JSON manifest from which
//! the run can be repeated with `--config <manifest>`.

use std::ffi::OsString;

use clap::{Parser, Subcommand, ValueEnum};
use hdbo::gp::LengthScaleMode;
use hdbo::training::{OptimizerSpec, TrainConfig, TrainMode};

pub mod bench_eval;
pub mod bo_run;
pub mod config;
pub mod data;
pub mod error;
pub mod gp_fit;
pub mod output;
pub mod theory_table;
pub mod vanish_sim;

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "hdbo",
    version,
    about = "Bayesian optimization and length-scale gradient diagnostics"
)]
pub struct Cli {
    /// Worker threads for parallel work (defaults to the available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run Bayesian optimization on a benchmark and write its trajectory.
    BoRun(bo_run::Args),
    /// Minimal dimensions at which the vanishing lower bound reaches each target.
    TheoryTable(theory_table::Args),
    /// Sweep dimensions, initial length-scales and kernels, recording training diagnostics.
    VanishSim(vanish_sim::Args),
    /// Fit a GP to a CSV data set and report the training diagnostics.
    GpFit(gp_fit::Args),
    /// Evaluate a benchmark at points read from a CSV file or drawn at random.
    BenchEval(bench_eval::Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ard,
    Isotropic,
}

impl From<ModeArg> for LengthScaleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ard => LengthScaleMode::Ard,
            ModeArg::Isotropic => LengthScaleMode::Isotropic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainModeArg {
    Mle,
    Map,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Rmsprop,
}

/// Training flags shared by the commands that fit models.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct TrainArgs {
    /// Kernel: `se` or `matern52`.
    #[arg(long)]
    pub kernel: Option<hdbo::gp::KernelKind>,
    /// Length-scale initialization: `robust:<c>` (c·√d), `const:<v>` or a bare number.
    #[arg(long = "ls-init", alias = "init")]
    pub init: Option<hdbo::training::InitStrategy>,
    #[arg(long, value_enum)]
    pub lengthscale_mode: Option<ModeArg>,
    /// Maximum likelihood, or MAP with the default priors.
    #[arg(long, value_enum)]
    pub train_mode: Option<TrainModeArg>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Learning rate (defaults depend on the optimizer).
    #[arg(long)]
    pub lr: Option<f64>,
}

impl TrainArgs {
    pub fn apply(&self, t: &mut TrainConfig) {
        if let Some(k) = self.kernel {
            t.kernel = k;
        }
        if let Some(i) = self.init {
            t.init = i;
        }
        if let Some(m) = self.lengthscale_mode {
            t.lengthscale_mode = m.into();
        }
        if let Some(m) = self.train_mode {
            t.mode = match m {
                TrainModeArg::Mle => TrainMode::Mle,
                TrainModeArg::Map => TrainMode::Map,
            };
        }
        apply_optimizer(&mut t.optimizer, self.optimizer, self.epochs, self.lr);
    }
}

pub fn apply_optimizer(
    spec: &mut OptimizerSpec,
    kind: Option<OptimizerArg>,
    epochs: Option<usize>,
    lr: Option<f64>,
) {
    let n = epochs.unwrap_or(spec.epochs());
    match (kind, &*spec) {
        (Some(OptimizerArg::Adam), OptimizerSpec::RmsProp { .. }) => *spec = OptimizerSpec::adam(n),
        (Some(OptimizerArg::Rmsprop), OptimizerSpec::Adam { .. }) => {
            *spec = OptimizerSpec::rmsprop(n)
        }
        _ => *spec = spec.with_epochs(n),
    }
    if let Some(v) = lr {
        match spec {
            OptimizerSpec::Adam { lr, .. } | OptimizerSpec::RmsProp { lr, .. } => *lr = v,
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(error::usage("--jobs must be at least 1"));
        }
        // A pool may already exist when dispatch is called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::BoRun(a) => bo_run::run(a),
        Command::TheoryTable(a) => theory_table::run(a),
        Command::VanishSim(a) => vanish_sim::run(a),
        Command::GpFit(a) => gp_fit::run(a),
        Command::BenchEval(a) => bench_eval::run(a),
    }
}

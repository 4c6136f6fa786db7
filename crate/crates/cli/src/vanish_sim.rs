use std::path::PathBuf;

use clap::ValueEnum;
use hdbo::diagnostics::{
    failing_dimension, monotonicity_violations, run_vanish_sweep, VanishSweepConfig, VanishSweepRow,
};
use serde::{Deserialize, Serialize};

use crate::config::{self, parse_list, RunManifest};
use crate::error::Result;
use crate::output::{check_parent_dir, fmt_f64, sibling, write_json, CsvOut};
use crate::OptimizerArg;

pub const COMMAND: &str = "vanish-sim";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 5 repeats, 500 epochs.
    Desk,
    /// 20 repeats, 1500 epochs.
    Full,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: Preset,
    /// `Hartmann6` (embedded as Hartmann6(d,6)) or `Rosenbrock` (Rosenbrock(d,d)).
    #[arg(long)]
    pub benchmark: Option<hdbo::diagnostics::SweepBenchmark>,
    /// Comma-separated input dimensions.
    #[arg(long)]
    pub dims: Option<String>,
    /// Comma-separated initial length-scales; `sqrt(d)` for the robust choice.
    #[arg(long)]
    pub lengthscales: Option<String>,
    /// Comma-separated kernels.
    #[arg(long)]
    pub kernels: Option<String>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sweep CSV, one row per cell; the failing-dimension summary and the
    /// manifest are written next to it.
    #[arg(long, required = true)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub sweep: VanishSweepConfig,
    pub out: PathBuf,
}

pub fn resolve(args: &Args) -> Result<Settings> {
    let mut sweep = match args.preset {
        Preset::Desk => VanishSweepConfig::desk(),
        Preset::Full => VanishSweepConfig::full(),
    };
    if let Some(seed) = config::env_seed()? {
        sweep.seed = seed;
    }
    let s = Settings {
        sweep,
        out: args.out.clone(),
    };
    let mut s = config::apply_file(s, args.config.as_deref(), COMMAND)?;
    let c = &mut s.sweep;
    if let Some(b) = args.benchmark {
        c.benchmark = b;
    }
    if let Some(t) = &args.dims {
        c.dims = parse_list(t, "dimension")?;
    }
    if let Some(t) = &args.lengthscales {
        c.lengthscales = parse_list(t, "length-scale")?;
    }
    if let Some(t) = &args.kernels {
        c.kernels = parse_list(t, "kernel")?;
    }
    if let Some(v) = args.n_train {
        c.n_train = v;
    }
    if let Some(v) = args.n_test {
        c.n_test = v;
    }
    if let Some(v) = args.repeats {
        c.repeats = v;
    }
    crate::apply_optimizer(&mut c.optimizer, args.optimizer, args.epochs, args.lr);
    if let Some(v) = args.seed {
        c.seed = v;
    }
    s.out = args.out.clone();
    Ok(s)
}

pub fn run(args: Args) -> Result<()> {
    let s = resolve(&args)?;
    s.sweep.validate()?;
    check_parent_dir(&s.out)?;
    let rows = run_vanish_sweep(&s.sweep)?;
    write_rows(&s.out, &rows)?;
    let summary = sibling(&s.out, "summary.csv");
    write_summary(&summary, &s.sweep, &rows)?;
    let manifest = RunManifest::new(COMMAND, s.sweep.seed, &s, vec![s.out.clone(), summary])?;
    write_json(&sibling(&s.out, "manifest.json"), &manifest)?;

    for r in rows.iter().filter(|r| !r.errors.is_empty()) {
        eprintln!(
            "d={} {} {}: {} failed fits, first: {}",
            r.d,
            r.lengthscale,
            r.kernel,
            r.errors.len(),
            r.errors[0]
        );
    }
    for r in monotonicity_violations(&rows) {
        eprintln!(
            "note: d={} {} {} passes after a smaller d failed",
            r.d, r.lengthscale, r.kernel
        );
    }
    Ok(())
}

pub const ROW_HEADER: [&str; 14] = [
    "d",
    "lengthscale",
    "kernel",
    "mse_mean",
    "mse_sd",
    "grad_norm_mean",
    "grad_norm_sd",
    "grad_norm_median",
    "ls_rel_diff_mean",
    "ls_rel_diff_sd",
    "ls_rel_diff_median",
    "n_ok",
    "n_errors",
    "failed",
];

fn write_rows(path: &std::path::Path, rows: &[VanishSweepRow]) -> Result<()> {
    let mut out = CsvOut::create(Some(path))?;
    out.row(ROW_HEADER)?;
    for r in rows {
        out.row([
            r.d.to_string(),
            r.lengthscale.clone(),
            r.kernel.name().to_string(),
            fmt_f64(r.mse_mean),
            fmt_f64(r.mse_sd),
            fmt_f64(r.grad_norm_mean),
            fmt_f64(r.grad_norm_sd),
            fmt_f64(r.grad_norm_median),
            fmt_f64(r.ls_rel_diff_mean),
            fmt_f64(r.ls_rel_diff_sd),
            fmt_f64(r.ls_rel_diff_median),
            r.n_ok.to_string(),
            r.errors.len().to_string(),
            r.failed.to_string(),
        ])?;
    }
    out.finish()
}

fn write_summary(
    path: &std::path::Path,
    cfg: &VanishSweepConfig,
    rows: &[VanishSweepRow],
) -> Result<()> {
    let mut out = CsvOut::create(Some(path))?;
    out.row(["kernel", "lengthscale", "failing_d"])?;
    for &kernel in &cfg.kernels {
        for ls in &cfg.lengthscales {
            let label = ls.label();
            let first = failing_dimension(rows, kernel, &label);
            out.row([
                kernel.name().to_string(),
                label,
                first.map(|d| d.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    out.finish()
}

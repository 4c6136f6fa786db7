use std::path::PathBuf;

use hdbo::acquisition::AcquisitionSpec;
use hdbo::benchmarks::BenchmarkSpec;
use hdbo::bo::{run_bo, BoConfig, Trajectory};
use hdbo::gp::KernelKind;
use hdbo::training::{InitStrategy, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::config::{self, RunManifest};
use crate::error::{usage, CliError, Result};
use crate::output::{check_parent_dir, fmt_f64, sibling, write_json, CsvOut};
use crate::TrainArgs;

pub const COMMAND: &str = "bo-run";

/// Trajectories wider than this put their query coordinates in a sibling file.
pub const MAX_INLINE_DIM: usize = 32;

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// JSON settings file or a manifest from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Benchmark as `Name(d,d_eff)`, e.g. `Hartmann6(6,6)`.
    #[arg(long)]
    pub benchmark: Option<String>,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Acquisition: `ucb:<lambda>`, `ei`, `logei` or `ts:<candidates>`.
    #[arg(long)]
    pub acq: Option<AcquisitionSpec>,
    /// Total number of objective evaluations, initial design included.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub n_init: Option<usize>,
    /// Master seed (falls back to HDBO_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub acq_starts: Option<usize>,
    #[arg(long)]
    pub acq_iters: Option<usize>,
    #[arg(long)]
    pub acq_step: Option<f64>,
    /// Trajectory CSV; the manifest goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record per-step wall-clock times (makes the CSV differ between runs).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub benchmark: String,
    pub run: BoConfig,
    pub out: PathBuf,
    pub timing: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let training = TrainConfig::new(KernelKind::Matern52, InitStrategy::RobustSqrtD { c: 1.0 });
        Self {
            benchmark: String::new(),
            run: BoConfig::new(training, AcquisitionSpec::default(), 100, 0),
            out: PathBuf::from("trajectory.csv"),
            timing: false,
        }
    }
}

pub fn resolve(args: &Args) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(seed) = config::env_seed()? {
        s.run.seed = seed;
    }
    let mut s = config::apply_file(s, args.config.as_deref(), COMMAND)?;
    if let Some(b) = &args.benchmark {
        s.benchmark = b.clone();
    }
    args.train.apply(&mut s.run.training);
    if let Some(a) = args.acq {
        s.run.acquisition = a;
    }
    if let Some(v) = args.budget {
        s.run.budget = v;
    }
    if let Some(v) = args.n_init {
        s.run.n_init = v;
    }
    if let Some(v) = args.seed {
        s.run.seed = v;
    }
    if let Some(v) = args.acq_starts {
        s.run.acq_opt.n_starts = v;
    }
    if let Some(v) = args.acq_iters {
        s.run.acq_opt.n_iters = v;
    }
    if let Some(v) = args.acq_step {
        s.run.acq_opt.step_size = v;
    }
    if let Some(p) = &args.out {
        s.out = p.clone();
    }
    s.timing |= args.timing;
    if s.benchmark.trim().is_empty() {
        return Err(usage(
            "a benchmark is required (--benchmark \"Name(d,d_eff)\")",
        ));
    }
    Ok(s)
}

pub fn run(args: Args) -> Result<()> {
    let s = resolve(&args)?;
    let bench: BenchmarkSpec = s.benchmark.parse()?;
    s.run.validate()?;
    check_parent_dir(&s.out)?;
    let traj = run_bo(&bench, &s.run)?;
    let outputs = write_trajectory(&s, &traj)?;

    let manifest_path = sibling(&s.out, "manifest.json");
    let mut manifest = RunManifest::new(COMMAND, s.run.seed, &s, outputs)?;
    manifest.error = traj.error.clone();
    write_json(&manifest_path, &manifest)?;

    match &traj.error {
        Some(e) => Err(CliError::Runtime(format!(
            "run stopped after {} of {} evaluations: {e}",
            traj.records.len(),
            s.run.budget
        ))),
        None => {
            eprintln!(
                "{}: {} evaluations, best {} -> {}",
                bench.name(),
                traj.records.len(),
                traj.best().map(fmt_f64).unwrap_or_default(),
                s.out.display()
            );
            Ok(())
        }
    }
}

/// Writes the trajectory CSV (and, for wide inputs, the coordinate CSV);
/// returns the paths written.
pub fn write_trajectory(s: &Settings, traj: &Trajectory) -> Result<Vec<PathBuf>> {
    let d = traj.records.first().map_or(0, |r| r.x_query.len());
    let inline = d <= MAX_INLINE_DIM;
    let coords_path = sibling(&s.out, "coords.csv");
    let coords_name = coords_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut out = CsvOut::create(Some(&s.out))?;
    let mut header = vec!["step".to_string()];
    if inline {
        header.extend((1..=d).map(|i| format!("x{i}")));
    } else {
        header.push("x_file".into());
    }
    header.extend(
        [
            "y",
            "best_so_far",
            "initial_grad_norm",
            "ls_rel_diff",
            "wall_time_s",
        ]
        .map(String::from),
    );
    out.row(&header)?;
    for r in &traj.records {
        let mut row = vec![r.step.to_string()];
        if inline {
            row.extend(r.x_query.iter().map(|v| fmt_f64(*v)));
        } else {
            row.push(coords_name.clone());
        }
        row.push(fmt_f64(r.y));
        row.push(fmt_f64(r.best_so_far));
        match r.diagnostics {
            Some(dg) => {
                row.push(fmt_f64(dg.initial_grad_norm));
                row.push(fmt_f64(dg.ls_rel_diff));
            }
            None => row.extend([String::new(), String::new()]),
        }
        row.push(if s.timing {
            fmt_f64(r.wall_time_s)
        } else {
            String::new()
        });
        out.row(&row)?;
    }
    out.finish()?;

    let mut written = vec![s.out.clone()];
    if !inline {
        let mut c = CsvOut::create(Some(&coords_path))?;
        let mut header = vec!["step".to_string()];
        header.extend((1..=d).map(|i| format!("x{i}")));
        c.row(&header)?;
        for r in &traj.records {
            let mut row = vec![r.step.to_string()];
            row.extend(r.x_query.iter().map(|v| fmt_f64(*v)));
            c.row(&row)?;
        }
        c.finish()?;
        written.push(coords_path);
    }
    Ok(written)
}

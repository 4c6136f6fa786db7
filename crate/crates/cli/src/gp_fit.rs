use std::path::{Path, PathBuf};

use hdbo::gp::{Dataset, KernelKind};
use hdbo::training::{evaluate, fit, EvalReport, InitStrategy, TrainConfig, TrainReport};
use serde::{Deserialize, Serialize};

use crate::config::{self, RunManifest};
use crate::data::{read_rows, split_xy};
use crate::error::{usage, CliError, Result};
use crate::output::{sibling, write_json};
use crate::TrainArgs;

pub const COMMAND: &str = "gp-fit";

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training CSV: input columns followed by the output column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Optional test CSV with the same layout.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Expected input dimension; the data must match it.
    #[arg(long, conflicts_with = "dims_from_data")]
    pub dim: Option<usize>,
    /// Take the input dimension from the data file (the default).
    #[arg(long)]
    pub dims_from_data: bool,
    /// Report JSON (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub data: PathBuf,
    pub test: Option<PathBuf>,
    pub training: TrainConfig,
    /// `None` means the dimension comes from the data.
    pub dim: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            data: PathBuf::new(),
            test: None,
            training: TrainConfig::new(KernelKind::Matern52, InitStrategy::RobustSqrtD { c: 1.0 }),
            dim: None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub n: usize,
    pub d: usize,
    /// Initial value of every length-scale.
    pub ls_init: f64,
    pub report: TrainReport,
    pub lengthscales: Vec<f64>,
    pub amplitude: f64,
    pub noise_var: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<EvalReport>,
}

pub fn resolve(args: &Args) -> Result<Settings> {
    let mut s = config::apply_file(Settings::default(), args.config.as_deref(), COMMAND)?;
    if let Some(p) = &args.data {
        s.data = p.clone();
    }
    if args.test.is_some() {
        s.test = args.test.clone();
    }
    args.train.apply(&mut s.training);
    if args.dims_from_data {
        s.dim = None;
    } else if args.dim.is_some() {
        s.dim = args.dim;
    }
    if args.out.is_some() {
        s.out = args.out.clone();
    }
    if s.data.as_os_str().is_empty() {
        return Err(usage("a training file is required (--data <csv>)"));
    }
    Ok(s)
}

pub fn load(path: &Path) -> Result<Dataset> {
    let (x, y) = split_xy(read_rows(path)?, path)?;
    Ok(Dataset::from_rows(&x, &y)?)
}

pub fn fit_output(s: &Settings) -> Result<FitOutput> {
    let train = load(&s.data)?;
    let d = train.dim();
    if let Some(want) = s.dim {
        if want != d {
            return Err(usage(format!(
                "{} has {d} input columns, expected {want}",
                s.data.display()
            )));
        }
    }
    let test = match &s.test {
        Some(p) => {
            let t = load(p)?;
            if t.dim() != d {
                return Err(usage(format!(
                    "{} has {} input columns, training data has {d}",
                    p.display(),
                    t.dim()
                )));
            }
            Some(t)
        }
        None => None,
    };
    let (gp, report) = fit(&train, &s.training)?;
    let h = gp.hyper();
    Ok(FitOutput {
        n: train.len(),
        d,
        ls_init: s.training.init.value_for_dim(d),
        report,
        lengthscales: h.kernel.lengthscales.values().to_vec(),
        amplitude: h.kernel.amplitude,
        noise_var: h.noise_var,
        test: test.map(|t| evaluate(&gp, &t)).transpose()?,
    })
}

pub fn run(args: Args) -> Result<()> {
    let s = resolve(&args)?;
    let out = fit_output(&s)?;
    match &s.out {
        Some(path) => {
            write_json(path, &out)?;
            let manifest = RunManifest::new(COMMAND, 0, &s, vec![path.clone()])?;
            write_json(&sibling(path, "manifest.json"), &manifest)?;
        }
        None => {
            let text =
                serde_json::to_string_pretty(&out).map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}

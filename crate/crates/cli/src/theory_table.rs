use std::path::PathBuf;

use hdbo::gp::KernelKind;
use hdbo::theory::{
    bound_row, min_dim_table_for, vanish_prob_lower_bound, vanish_prob_upper_bound_raw,
    LengthScaleSetting, LowerBound, MACHINE_EPSILON, MIN_DIM_TARGETS,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, parse_list, RunManifest};
use crate::error::Result;
use crate::output::{fmt_f64, fmt_opt, sibling, write_json, CsvOut};

pub const COMMAND: &str = "theory-table";

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rounding threshold ξ (default 2⁻⁵³).
    #[arg(long)]
    pub xi: Option<f64>,
    /// Fixed initial length-scale ℓ₀ for the table.
    #[arg(long)]
    pub l0: Option<f64>,
    /// Comma-separated probability targets in (0, 1).
    #[arg(long)]
    pub targets: Option<String>,
    /// Use this τ for both kernels instead of the computed thresholds.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Table CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a bound report (bounds and Monte-Carlo estimates over d) here.
    #[arg(long)]
    pub bounds_out: Option<PathBuf>,
    /// Comma-separated dimensions for the bound report.
    #[arg(long)]
    pub dims: Option<String>,
    /// Comma-separated fixed length-scales for the bound report.
    #[arg(long)]
    pub bound_l0: Option<String>,
    /// Comma-separated c values (ℓ₀ = c√d) for the bound report.
    #[arg(long)]
    pub bound_c: Option<String>,
    /// Monte-Carlo pairs per report row; 0 skips simulation.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Add the unclamped bound formulas to the report.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub xi: f64,
    pub l0: f64,
    pub targets: Vec<f64>,
    pub tau: Option<f64>,
    pub out: Option<PathBuf>,
    pub bounds_out: Option<PathBuf>,
    pub dims: Vec<usize>,
    pub bound_l0: Vec<f64>,
    pub bound_c: Vec<f64>,
    pub mc_samples: usize,
    pub seed: u64,
    pub raw: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            xi: MACHINE_EPSILON,
            l0: 0.5,
            targets: MIN_DIM_TARGETS.to_vec(),
            tau: None,
            out: None,
            bounds_out: None,
            dims: vec![100, 200, 400, 800],
            bound_l0: vec![0.5, 1.0],
            bound_c: vec![0.5, 1.0],
            mc_samples: 100_000,
            seed: 0,
            raw: false,
        }
    }
}

pub fn resolve(args: &Args) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(seed) = config::env_seed()? {
        s.seed = seed;
    }
    let mut s = config::apply_file(s, args.config.as_deref(), COMMAND)?;
    if let Some(v) = args.xi {
        s.xi = v;
    }
    if let Some(v) = args.l0 {
        s.l0 = v;
    }
    if let Some(t) = &args.targets {
        s.targets = parse_list(t, "target")?;
    }
    if args.tau.is_some() {
        s.tau = args.tau;
    }
    if args.out.is_some() {
        s.out = args.out.clone();
    }
    if args.bounds_out.is_some() {
        s.bounds_out = args.bounds_out.clone();
    }
    if let Some(t) = &args.dims {
        s.dims = parse_list(t, "dimension")?;
    }
    if let Some(t) = &args.bound_l0 {
        s.bound_l0 = parse_list(t, "length-scale")?;
    }
    if let Some(t) = &args.bound_c {
        s.bound_c = parse_list(t, "c")?;
    }
    if let Some(v) = args.mc_samples {
        s.mc_samples = v;
    }
    if let Some(v) = args.seed {
        s.seed = v;
    }
    s.raw |= args.raw;
    Ok(s)
}

pub fn run(args: Args) -> Result<()> {
    let s = resolve(&args)?;
    let rows = min_dim_table_for(s.xi, s.l0, &s.targets, s.tau)?;
    let mut out = CsvOut::create(s.out.as_deref())?;
    out.row(["kernel", "target", "min_d"])?;
    for r in &rows {
        out.row([
            r.kernel.name().to_string(),
            fmt_f64(r.target),
            r.min_dim.to_string(),
        ])?;
    }
    out.finish()?;

    let mut outputs: Vec<PathBuf> = s.out.iter().cloned().collect();
    if let Some(path) = &s.bounds_out {
        write_bounds(&s, path)?;
        outputs.push(path.clone());
    }
    if let Some(p) = outputs.first() {
        write_json(
            &sibling(p, "manifest.json"),
            &RunManifest::new(COMMAND, s.seed, &s, outputs.clone())?,
        )?;
    }
    Ok(())
}

fn write_bounds(s: &Settings, path: &std::path::Path) -> Result<()> {
    let mut jobs = Vec::new();
    for kernel in [KernelKind::SquaredExponential, KernelKind::Matern52] {
        let settings = s
            .bound_l0
            .iter()
            .map(|&l| LengthScaleSetting::Fixed(l))
            .chain(s.bound_c.iter().map(|&c| LengthScaleSetting::Robust(c)));
        for setting in settings {
            for &d in &s.dims {
                jobs.push((kernel, setting, d));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(kernel, setting, d)| {
            bound_row(kernel, s.xi, s.tau, setting, d, s.mc_samples, s.seed)
        })
        .collect::<hdbo::Result<Vec<_>>>()?;

    let mut out = CsvOut::create(Some(path))?;
    let mut header = vec![
        "kernel",
        "xi",
        "l0_or_c",
        "tau",
        "d",
        "lower_bound",
        "upper_bound",
        "mc_estimate",
        "mc_se",
    ];
    if s.raw {
        header.extend(["lower_bound_raw", "upper_bound_raw"]);
    }
    out.row(&header)?;
    for r in rows {
        let label = match r.setting {
            LengthScaleSetting::Fixed(l) => format!("l0={}", fmt_f64(l)),
            LengthScaleSetting::Robust(c) => format!("c={}", fmt_f64(c)),
        };
        let mut row = vec![
            r.kernel.name().to_string(),
            fmt_f64(r.xi),
            label,
            fmt_f64(r.tau),
            r.d.to_string(),
            fmt_opt(r.lower_bound),
            fmt_opt(r.upper_bound),
            fmt_opt(r.mc.map(|m| m.estimate)),
            fmt_opt(r.mc.map(|m| m.std_error)),
        ];
        if s.raw {
            match r.setting {
                LengthScaleSetting::Fixed(l) => {
                    let raw = match vanish_prob_lower_bound(r.d, l, r.tau) {
                        LowerBound::Value { raw, .. } => Some(raw),
                        LowerBound::NotApplicable => None,
                    };
                    row.push(fmt_opt(raw));
                    row.push(String::new());
                }
                LengthScaleSetting::Robust(c) => {
                    row.push(String::new());
                    row.push(fmt_opt(vanish_prob_upper_bound_raw(r.d, c, r.tau).ok()));
                }
            }
        }
        out.row(&row)?;
    }
    out.finish()
}

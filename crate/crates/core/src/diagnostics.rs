//! Gradient-vanishing experiments: sweeps over dimension, initial length-scale
//! and kernel, plus finite-difference oracles for the likelihood gradient.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{BenchmarkKind, BenchmarkSpec};
use crate::error::{invalid, Result};
use crate::gp::{
    Dataset, FittedGp, GpHyperparams, HyperGradient, KernelKind, KernelParams, LengthScales,
    OutputScaling,
};
use crate::rng::{self, STREAM_SWEEP};
use crate::training::{evaluate, fit, InitStrategy, OptimizerSpec, TrainConfig};

/// A row counts as failed when the median initial gradient norm and the
/// median length-scale drift both fall below these.
pub const FAIL_GRAD_NORM: f64 = 1e-8;
pub const FAIL_LS_DRIFT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepBenchmark {
    /// `Hartmann6(d, 6)`.
    Hartmann6,
    /// `Rosenbrock(d, d)`.
    Rosenbrock,
}

impl SweepBenchmark {
    pub fn at_dim(self, d: usize) -> Result<BenchmarkSpec> {
        match self {
            SweepBenchmark::Hartmann6 => BenchmarkSpec::new(BenchmarkKind::Hartmann6, d, 6),
            SweepBenchmark::Rosenbrock => BenchmarkSpec::new(BenchmarkKind::Rosenbrock, d, d),
        }
    }
}

impl std::str::FromStr for SweepBenchmark {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hartmann6" => Ok(SweepBenchmark::Hartmann6),
            "rosenbrock" => Ok(SweepBenchmark::Rosenbrock),
            _ => Err(invalid(format!(
                "sweep benchmark must be Hartmann6 or Rosenbrock, got `{s}`"
            ))),
        }
    }
}

/// Initial length-scale for a sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SweepLengthScale {
    Constant(f64),
    SqrtD,
}

impl SweepLengthScale {
    pub fn strategy(self) -> InitStrategy {
        match self {
            SweepLengthScale::Constant(value) => InitStrategy::Constant { value },
            SweepLengthScale::SqrtD => InitStrategy::RobustSqrtD { c: 1.0 },
        }
    }

    pub fn label(self) -> String {
        match self {
            SweepLengthScale::Constant(v) => format!("{v}"),
            SweepLengthScale::SqrtD => "sqrt(d)".to_string(),
        }
    }
}

impl std::str::FromStr for SweepLengthScale {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t, "sqrt(d)" | "sqrtd" | "sqrt") {
            return Ok(SweepLengthScale::SqrtD);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| invalid(format!("bad initial length-scale `{s}`")))?;
        if v > 0.0 {
            Ok(SweepLengthScale::Constant(v))
        } else {
            Err(invalid(format!(
                "initial length-scale must be positive, got {v}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishSweepConfig {
    pub benchmark: SweepBenchmark,
    pub dims: Vec<usize>,
    pub lengthscales: Vec<SweepLengthScale>,
    pub kernels: Vec<KernelKind>,
    pub n_train: usize,
    pub n_test: usize,
    pub repeats: usize,
    pub optimizer: OptimizerSpec,
    pub seed: u64,
}

impl VanishSweepConfig {
    /// Reduced repeats and epochs for a single machine.
    pub fn desk() -> Self {
        Self {
            benchmark: SweepBenchmark::Hartmann6,
            dims: vec![50, 100, 200, 300, 400, 500, 600],
            lengthscales: vec![
                SweepLengthScale::Constant(0.1),
                SweepLengthScale::Constant(0.5),
                SweepLengthScale::Constant(0.693),
                SweepLengthScale::Constant(1.0),
                SweepLengthScale::SqrtD,
            ],
            kernels: vec![KernelKind::SquaredExponential, KernelKind::Matern52],
            n_train: 500,
            n_test: 100,
            repeats: 5,
            optimizer: OptimizerSpec::adam(500),
            seed: 0,
        }
    }

    /// Twenty repeats of 1500 epochs each.
    pub fn full() -> Self {
        Self {
            repeats: 20,
            optimizer: OptimizerSpec::adam(1500),
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 || self.repeats == 0 {
            return Err(invalid("n_train, n_test and repeats must be at least 1"));
        }
        if self.dims.contains(&0) {
            return Err(invalid("sweep dimensions must be positive"));
        }
        self.optimizer.validate()
    }

    /// Every `(d, ℓ₀, kernel)` combination, in grid order.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::new();
        for (ki, &kernel) in self.kernels.iter().enumerate() {
            for (li, &lengthscale) in self.lengthscales.iter().enumerate() {
                for &d in &self.dims {
                    out.push(SweepCell {
                        d,
                        lengthscale,
                        kernel,
                        ls_index: li,
                        kernel_index: ki,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub d: usize,
    pub lengthscale: SweepLengthScale,
    pub kernel: KernelKind,
    /// Positions in the config lists, used for seed derivation.
    pub ls_index: usize,
    pub kernel_index: usize,
}

/// Outcome of one fit inside a sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub mse: f64,
    pub test_log_lik: f64,
    pub initial_grad_norm: f64,
    pub ls_rel_diff: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishSweepRow {
    pub d: usize,
    pub lengthscale: String,
    pub kernel: KernelKind,
    pub mse_mean: f64,
    pub mse_sd: f64,
    pub grad_norm_mean: f64,
    pub grad_norm_sd: f64,
    pub grad_norm_median: f64,
    pub ls_rel_diff_mean: f64,
    pub ls_rel_diff_sd: f64,
    pub ls_rel_diff_median: f64,
    pub n_ok: usize,
    /// Messages of fits that raised errors.
    pub errors: Vec<String>,
    pub failed: bool,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Uniform train and test sets for one repeat of a cell, labelled by the
/// benchmark and standardized jointly.
pub fn sweep_data(
    cfg: &VanishSweepConfig,
    cell: &SweepCell,
    repeat: usize,
) -> Result<(Dataset, Dataset)> {
    let bench = cfg.benchmark.at_dim(cell.d)?;
    let mut r = rng::stream(
        cfg.seed,
        &[
            cell.d as u64,
            cell.ls_index as u64,
            cell.kernel_index as u64,
            repeat as u64,
            STREAM_SWEEP,
        ],
    );
    let n = cfg.n_train + cfg.n_test;
    let x = DMatrix::from_fn(n, cell.d, |_, _| r.random::<f64>());
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        y[i] = bench.evaluate(&row)?;
    }
    // Outputs are standardized over train and test together.
    let s = OutputScaling::standardize(&y);
    y.iter_mut().for_each(|v| *v = s.forward(*v));
    let split = |from: usize, len: usize| {
        Dataset::new(
            x.rows(from, len).into_owned(),
            y.rows(from, len).into_owned(),
        )
    };
    Ok((split(0, cfg.n_train)?, split(cfg.n_train, cfg.n_test)?))
}

pub fn run_repeat(
    cfg: &VanishSweepConfig,
    cell: &SweepCell,
    repeat: usize,
) -> Result<RepeatResult> {
    let (train, test) = sweep_data(cfg, cell, repeat)?;
    let mut tc = TrainConfig::new(cell.kernel, cell.lengthscale.strategy());
    tc.optimizer = cfg.optimizer;
    let (gp, report) = fit(&train, &tc)?;
    let ev = evaluate(&gp, &test)?;
    Ok(RepeatResult {
        mse: ev.mse,
        test_log_lik: ev.test_log_lik,
        initial_grad_norm: report.initial_grad_norm,
        ls_rel_diff: report.ls_rel_diff,
        epochs_run: report.epochs_run,
    })
}

/// Aggregates repeat outcomes into one row.
pub fn aggregate(cell: &SweepCell, results: &[Result<RepeatResult>]) -> VanishSweepRow {
    let ok: Vec<&RepeatResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let errors = results
        .iter()
        .filter_map(|r| r.as_ref().err().map(|e| e.to_string()))
        .collect();
    let col = |f: fn(&RepeatResult) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
    let mse = col(|r| r.mse);
    let grad = col(|r| r.initial_grad_norm);
    let drift = col(|r| r.ls_rel_diff);
    let (mse_mean, mse_sd) = mean_sd(&mse);
    let (grad_norm_mean, grad_norm_sd) = mean_sd(&grad);
    let (ls_rel_diff_mean, ls_rel_diff_sd) = mean_sd(&drift);
    let grad_norm_median = median(&grad);
    let ls_rel_diff_median = median(&drift);
    VanishSweepRow {
        d: cell.d,
        lengthscale: cell.lengthscale.label(),
        kernel: cell.kernel,
        mse_mean,
        mse_sd,
        grad_norm_mean,
        grad_norm_sd,
        grad_norm_median,
        ls_rel_diff_mean,
        ls_rel_diff_sd,
        ls_rel_diff_median,
        n_ok: ok.len(),
        errors,
        failed: grad_norm_median < FAIL_GRAD_NORM && ls_rel_diff_median < FAIL_LS_DRIFT,
    }
}

/// Runs the listed cells, every repeat as an independent job. Rows come back
/// in the order of `cells`.
pub fn run_vanish_cells(
    cfg: &VanishSweepConfig,
    cells: &[SweepCell],
) -> Result<Vec<VanishSweepRow>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.repeats).map(move |r| (c, r)))
        .collect();
    let results: Vec<Result<RepeatResult>> = jobs
        .par_iter()
        .map(|&(c, r)| run_repeat(cfg, &cells[c], r))
        .collect();
    Ok(cells
        .iter()
        .zip(results.chunks(cfg.repeats))
        .map(|(cell, res)| aggregate(cell, res))
        .collect())
}

/// Runs the full `(kernel, ℓ₀, d)` grid of `cfg`.
pub fn run_vanish_sweep(cfg: &VanishSweepConfig) -> Result<Vec<VanishSweepRow>> {
    run_vanish_cells(cfg, &cfg.cells())
}

/// Smallest grid dimension whose row is marked failed for the given kernel
/// and length-scale label.
pub fn failing_dimension(
    rows: &[VanishSweepRow],
    kernel: KernelKind,
    lengthscale: &str,
) -> Option<usize> {
    rows.iter()
        .filter(|r| r.kernel == kernel && r.lengthscale == lengthscale && r.failed)
        .map(|r| r.d)
        .min()
}

/// Rows where a failure at some `d` is followed by a pass at a larger `d`
/// for the same kernel and length-scale.
pub fn monotonicity_violations(rows: &[VanishSweepRow]) -> Vec<&VanishSweepRow> {
    rows.iter()
        .filter(|r| {
            !r.failed
                && rows.iter().any(|o| {
                    o.kernel == r.kernel && o.lengthscale == r.lengthscale && o.failed && o.d < r.d
                })
        })
        .collect()
}

fn with_hyper(gp: &FittedGp, hyper: GpHyperparams) -> Result<f64> {
    Ok(FittedGp::with_scaling(hyper, gp.data().clone(), gp.scaling())?.log_marginal_likelihood())
}

fn perturbed(gp: &FittedGp, index: usize, delta: f64) -> Result<GpHyperparams> {
    let h = gp.hyper();
    let mut ls = h.kernel.lengthscales.values().to_vec();
    let n_ls = ls.len();
    let mut amp = h.kernel.amplitude;
    let mut noise = h.noise_var;
    let mut mean = h.mean;
    match index {
        i if i < n_ls => ls[i] += delta,
        i if i == n_ls => amp += delta,
        i if i == n_ls + 1 => noise += delta,
        _ => mean += delta,
    }
    let kernel = KernelParams::new(
        h.kernel.kind,
        amp,
        LengthScales::new(h.kernel.lengthscales.mode(), ls)?,
    )?;
    GpHyperparams::new(kernel, mean, noise)
}

fn base_values(gp: &FittedGp) -> Vec<f64> {
    let h = gp.hyper();
    let mut v = h.kernel.lengthscales.values().to_vec();
    v.extend([h.kernel.amplitude, h.noise_var, h.mean]);
    v
}

fn to_gradient(g: Vec<f64>) -> HyperGradient {
    let n = g.len() - 3;
    HyperGradient {
        lengthscales: g[..n].to_vec(),
        amplitude: g[n],
        noise_var: g[n + 1],
        mean: g[n + 2],
    }
}

/// Central-difference estimate of the log-marginal-likelihood gradient.
/// Positive parameters are stepped by `step` relative to their value, the
/// mean by `step` absolutely.
pub fn grad_finite_diff_oracle(gp: &FittedGp, step: f64) -> Result<HyperGradient> {
    if !(step > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let base = base_values(gp);
    let last = base.len() - 1;
    let mut g = Vec::with_capacity(base.len());
    for (i, &v) in base.iter().enumerate() {
        let h = if i == last { step } else { step * v };
        let up = with_hyper(gp, perturbed(gp, i, h)?)?;
        let down = with_hyper(gp, perturbed(gp, i, -h)?)?;
        g.push((up - down) / (2.0 * h));
    }
    Ok(to_gradient(g))
}

/// Forward-difference estimate, an independent cross-check on
/// [`grad_finite_diff_oracle`] with first-order accuracy.
pub fn grad_forward_diff_oracle(gp: &FittedGp, step: f64) -> Result<HyperGradient> {
    if !(step > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let f0 = gp.log_marginal_likelihood();
    let base = base_values(gp);
    let last = base.len() - 1;
    let mut g = Vec::with_capacity(base.len());
    for (i, &v) in base.iter().enumerate() {
        let h = if i == last { step } else { step * v };
        g.push((with_hyper(gp, perturbed(gp, i, h)?)? - f0) / h);
    }
    Ok(to_gradient(g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_spread() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn failing_dimension_picks_smallest() {
        let cell = |d, failed| VanishSweepRow {
            d,
            lengthscale: "0.5".into(),
            kernel: KernelKind::SquaredExponential,
            mse_mean: 1.0,
            mse_sd: 0.0,
            grad_norm_mean: 0.0,
            grad_norm_sd: 0.0,
            grad_norm_median: 0.0,
            ls_rel_diff_mean: 0.0,
            ls_rel_diff_sd: 0.0,
            ls_rel_diff_median: 0.0,
            n_ok: 1,
            errors: vec![],
            failed,
        };
        let rows = vec![
            cell(50, false),
            cell(100, false),
            cell(200, true),
            cell(300, true),
        ];
        assert_eq!(
            failing_dimension(&rows, KernelKind::SquaredExponential, "0.5"),
            Some(200)
        );
        assert_eq!(failing_dimension(&rows, KernelKind::Matern52, "0.5"), None);
        assert!(monotonicity_violations(&rows).is_empty());
        let bad = vec![cell(50, true), cell(100, false)];
        assert_eq!(monotonicity_violations(&bad).len(), 1);
    }

    #[test]
    fn sweep_data_is_seeded() {
        let mut cfg = VanishSweepConfig::desk();
        cfg.n_train = 7;
        cfg.n_test = 3;
        let cell = cfg.cells()[0];
        let (a, _) = sweep_data(&cfg, &cell, 0).unwrap();
        let (b, _) = sweep_data(&cfg, &cell, 0).unwrap();
        let (c, _) = sweep_data(&cfg, &cell, 1).unwrap();
        assert_eq!(a.x(), b.x());
        assert_ne!(a.x(), c.x());
        assert_eq!(a.len(), 7);
    }

    #[test]
    fn lengthscale_labels_parse() {
        assert_eq!(
            "sqrt(d)".parse::<SweepLengthScale>().unwrap(),
            SweepLengthScale::SqrtD
        );
        assert_eq!(
            "0.693".parse::<SweepLengthScale>().unwrap(),
            SweepLengthScale::Constant(0.693)
        );
        assert!("-1".parse::<SweepLengthScale>().is_err());
    }
}

//! Acquisition functions and their maximization over the unit box.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gp::{FittedGp, Posterior};
use crate::linalg;
use crate::rng::{self, STREAM_ACQ, STREAM_CANDIDATES, STREAM_THOMPSON};
use crate::sobol::{Sobol, SOBOL_MAX_DIM};

pub const DEFAULT_UCB_LAMBDA: f64 = 1.5;
pub const DEFAULT_TS_CANDIDATES: usize = 3000;

/// Below this standardized improvement the log-EI switches from the direct
/// formula to an asymptotic series.
const LOG_EI_SERIES_BELOW: f64 = -10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AcquisitionSpec {
    Ucb { lambda: f64 },
    Ei,
    LogEi,
    Ts { n_candidates: usize },
}

impl Default for AcquisitionSpec {
    fn default() -> Self {
        AcquisitionSpec::Ucb {
            lambda: DEFAULT_UCB_LAMBDA,
        }
    }
}

impl AcquisitionSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AcquisitionSpec::Ucb { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => Err(
                invalid(format!("UCB lambda must be non-negative, got {lambda}")),
            ),
            AcquisitionSpec::Ts { n_candidates: 0 } => {
                Err(invalid("Thompson sampling needs at least one candidate"))
            }
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for AcquisitionSpec {
    type Err = Error;

    /// Accepts `ucb`, `ucb:<lambda>`, `ei`, `logei`, `ts` and `ts:<n>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n.to_string(), Some(a.to_string())),
            None => (lower.clone(), None),
        };
        let bad = || invalid(format!("bad acquisition `{s}`"));
        let spec = match (name.as_str(), arg) {
            ("ucb", None) => AcquisitionSpec::default(),
            ("ucb", Some(a)) => AcquisitionSpec::Ucb {
                lambda: a.parse().map_err(|_| bad())?,
            },
            ("ei", None) => AcquisitionSpec::Ei,
            ("logei" | "log-ei" | "log_ei", None) => AcquisitionSpec::LogEi,
            ("ts", None) => AcquisitionSpec::Ts {
                n_candidates: DEFAULT_TS_CANDIDATES,
            },
            ("ts", Some(a)) => AcquisitionSpec::Ts {
                n_candidates: a.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl std::fmt::Display for AcquisitionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AcquisitionSpec::Ucb { lambda } => write!(f, "ucb:{lambda}"),
            AcquisitionSpec::Ei => write!(f, "ei"),
            AcquisitionSpec::LogEi => write!(f, "logei"),
            AcquisitionSpec::Ts { n_candidates } => write!(f, "ts:{n_candidates}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcqOptConfig {
    pub n_starts: usize,
    pub n_iters: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for AcqOptConfig {
    fn default() -> Self {
        Self {
            n_starts: 32,
            n_iters: 200,
            step_size: 0.05,
            seed: 0,
        }
    }
}

impl AcqOptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts >= 1 && self.n_iters >= 1 && self.step_size > 0.0 {
            Ok(())
        } else {
            Err(invalid("acquisition optimizer settings must be positive"))
        }
    }
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn log_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * (2.0 * PI).ln()
}

/// `Σ_k (−1)^(k+1) (2k−1)!! / z^(2k)`, the bracket in `h(z) = φ(z)·[…]` for
/// large negative `z`. Terms are summed until they stop shrinking or drop
/// below rounding.
fn tail_series(z: f64) -> f64 {
    let inv = 1.0 / (z * z);
    let mut term = inv;
    let mut sum = inv;
    for k in 1..60 {
        let next = -term * (2 * k + 1) as f64 * inv;
        if next.abs() >= term.abs() || next.abs() < 1e-18 * sum.abs() {
            break;
        }
        sum += next;
        term = next;
    }
    sum
}

/// `log h(z)` with `h(z) = φ(z) + zΦ(z)`, the expected improvement of a
/// standard normal over `−z`.
fn log_h(z: f64) -> f64 {
    if z >= LOG_EI_SERIES_BELOW {
        (norm_pdf(z) + z * norm_cdf(z)).ln()
    } else {
        log_norm_pdf(z) + tail_series(z).ln()
    }
}

/// Upper confidence bound `μ + λ√v`.
pub fn ucb(p: &Posterior, lambda: f64) -> f64 {
    p.mean + lambda * p.variance.max(0.0).sqrt()
}

/// Expected improvement over `f_best` for maximization.
pub fn ei(p: &Posterior, f_best: f64) -> f64 {
    let diff = p.mean - f_best;
    if p.variance <= 0.0 {
        return diff.max(0.0);
    }
    let sd = p.variance.sqrt();
    let z = diff / sd;
    if z >= LOG_EI_SERIES_BELOW {
        (diff * norm_cdf(z) + sd * norm_pdf(z)).max(0.0)
    } else {
        sd * log_h(z).exp()
    }
}

/// Logarithm of [`ei`], finite far into the region where EI underflows.
/// Requires a strictly positive variance.
pub fn log_ei(p: &Posterior, f_best: f64) -> Result<f64> {
    if !(p.variance > 0.0) {
        return Err(invalid("log-EI requires a positive posterior variance"));
    }
    let sd = p.variance.sqrt();
    Ok(sd.ln() + log_h((p.mean - f_best) / sd))
}

/// Acquisition value and its gradient in `x`.
fn value_and_grad(
    gp: &FittedGp,
    spec: &AcquisitionSpec,
    f_best: f64,
    x: &[f64],
) -> (f64, Vec<f64>) {
    let (p, dmu, dvar) = gp
        .predict_with_gradient(x)
        .expect("point dimension matches the model");
    let sd = p.variance.sqrt();
    // ∂σ/∂x from ∂v/∂x; zero where the variance has collapsed.
    let dsd: Vec<f64> = if sd > 0.0 {
        dvar.iter().map(|g| g / (2.0 * sd)).collect()
    } else {
        vec![0.0; x.len()]
    };
    let combine =
        |a: f64, b: f64| -> Vec<f64> { dmu.iter().zip(&dsd).map(|(m, s)| a * m + b * s).collect() };
    match *spec {
        AcquisitionSpec::Ucb { lambda } => (ucb(&p, lambda), combine(1.0, lambda)),
        AcquisitionSpec::Ei => {
            if sd == 0.0 {
                let diff = p.mean - f_best;
                return (
                    diff.max(0.0),
                    combine(if diff > 0.0 { 1.0 } else { 0.0 }, 0.0),
                );
            }
            let z = (p.mean - f_best) / sd;
            (ei(&p, f_best), combine(norm_cdf(z), norm_pdf(z)))
        }
        AcquisitionSpec::LogEi => {
            if sd == 0.0 {
                let diff = p.mean - f_best;
                return if diff > 0.0 {
                    (diff.ln(), combine(1.0 / diff, 0.0))
                } else {
                    (f64::NEG_INFINITY, vec![0.0; x.len()])
                };
            }
            let z = (p.mean - f_best) / sd;
            // With h = φ·s: ∂/∂μ = Φ/(σh), ∂/∂σ = φ/(σh).
            let (cdf_ratio, pdf_ratio) = if z >= LOG_EI_SERIES_BELOW {
                let h = norm_pdf(z) + z * norm_cdf(z);
                (norm_cdf(z) / h, norm_pdf(z) / h)
            } else {
                let s = tail_series(z);
                ((1.0 / s - 1.0) / -z, 1.0 / s)
            };
            (sd.ln() + log_h(z), combine(cdf_ratio / sd, pdf_ratio / sd))
        }
        AcquisitionSpec::Ts { .. } => unreachable!("Thompson sampling is not gradient based"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CandidateSampler {
    #[default]
    Sobol,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// M×d points in `[0, 1)^d`.
    pub points: DMatrix<f64>,
    /// Set when Sobol points were requested beyond the tabulated dimensions
    /// and uniform points were drawn instead.
    pub sobol_fallback: bool,
}

pub fn candidate_set(
    d: usize,
    m: usize,
    sampler: CandidateSampler,
    seed: u64,
) -> Result<CandidateSet> {
    if d == 0 || m == 0 {
        return Err(invalid("candidate set needs d ≥ 1 and M ≥ 1"));
    }
    let fallback = sampler == CandidateSampler::Sobol && d > SOBOL_MAX_DIM;
    let mut points = DMatrix::<f64>::zeros(m, d);
    if sampler == CandidateSampler::Sobol && !fallback {
        let mut sobol = Sobol::new(d)?;
        let mut p = vec![0.0; d];
        for i in 0..m {
            sobol.next_into(&mut p);
            points
                .row_mut(i)
                .iter_mut()
                .zip(&p)
                .for_each(|(o, v)| *o = *v);
        }
    } else {
        let mut r = rng::stream(seed, &[STREAM_CANDIDATES]);
        for i in 0..m {
            for j in 0..d {
                points[(i, j)] = r.random::<f64>();
            }
        }
    }
    Ok(CandidateSet {
        points,
        sobol_fallback: fallback,
    })
}

fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Draws one joint posterior sample over the rows of `candidates` and returns
/// the index of its largest value (lowest index on ties).
pub fn thompson_select(gp: &FittedGp, candidates: &DMatrix<f64>, seed: u64) -> Result<usize> {
    Ok(argmax(
        thompson_sample(gp, candidates, seed)?.iter().copied(),
    ))
}

/// One joint posterior sample of the latent function at the rows of
/// `candidates`, on the raw output scale.
pub fn thompson_sample(
    gp: &FittedGp,
    candidates: &DMatrix<f64>,
    seed: u64,
) -> Result<DVector<f64>> {
    if candidates.nrows() == 0 {
        return Err(invalid("Thompson sampling needs at least one candidate"));
    }
    crate::error::check_dim(gp.dim(), candidates.ncols())?;
    let (mean, cov) = gp.joint_posterior(candidates)?;
    // Jitter follows the size of the posterior covariance itself, so that
    // nearly determined candidates are not swamped, with a floor tied to the
    // prior scale to absorb rounding in the posterior update.
    let prior_scale = gp.hyper().kernel.amplitude * gp.scaling().scale.powi(2);
    let scale = cov.diagonal().mean().max(1e-10 * prior_scale);
    let (chol, _) = linalg::cholesky_with_jitter(&cov, scale)?;
    let mut r = rng::stream(seed, &[STREAM_THOMPSON]);
    let z = DVector::from_fn(mean.len(), |_, _| r.sample::<f64, _>(StandardNormal));
    Ok(mean + chol.l() * z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcqOutcome {
    pub x: Vec<f64>,
    /// Acquisition value at `x`; for Thompson sampling, the sampled value.
    pub value: f64,
    pub sobol_fallback: bool,
}

fn project(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

/// Normalized projected gradient ascent from `x0`. Each iteration tries the
/// configured step and halves it until the value improves.
fn ascend(
    gp: &FittedGp,
    spec: &AcquisitionSpec,
    f_best: f64,
    cfg: &AcqOptConfig,
    x0: Vec<f64>,
) -> (Vec<f64>, f64) {
    let mut x = x0;
    let (mut val, mut grad) = value_and_grad(gp, spec, f_best, &x);
    let mut trial = vec![0.0; x.len()];
    for _ in 0..cfg.n_iters {
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(gnorm > 0.0 && gnorm.is_finite()) {
            break;
        }
        let mut step = cfg.step_size;
        let mut moved = false;
        while step > 1e-10 {
            for ((t, xi), g) in trial.iter_mut().zip(&x).zip(&grad) {
                *t = xi + step * g / gnorm;
            }
            project(&mut trial);
            let (tv, tg) = value_and_grad(gp, spec, f_best, &trial);
            if tv > val {
                x.copy_from_slice(&trial);
                val = tv;
                grad = tg;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (x, val)
}

/// Proposes the next query point in `[0, 1]^d`.
pub fn maximize_acquisition(
    gp: &FittedGp,
    spec: &AcquisitionSpec,
    cfg: &AcqOptConfig,
) -> Result<AcqOutcome> {
    spec.validate()?;
    cfg.validate()?;
    let d = gp.dim();
    if let AcquisitionSpec::Ts { n_candidates } = *spec {
        let cands = candidate_set(d, n_candidates, CandidateSampler::Sobol, cfg.seed)?;
        let sample = thompson_sample(gp, &cands.points, cfg.seed)?;
        let idx = argmax(sample.iter().copied());
        return Ok(AcqOutcome {
            x: cands.points.row(idx).iter().copied().collect(),
            value: sample[idx],
            sobol_fallback: cands.sobol_fallback,
        });
    }
    let f_best = gp.data().y().max();
    let results: Vec<(Vec<f64>, f64)> = (0..cfg.n_starts)
        .into_par_iter()
        .map(|s| {
            let mut r = rng::stream(cfg.seed, &[STREAM_ACQ, s as u64]);
            let x0: Vec<f64> = (0..d).map(|_| r.random::<f64>()).collect();
            ascend(gp, spec, f_best, cfg, x0)
        })
        .collect();
    let idx = argmax(results.iter().map(|(_, v)| *v));
    let (x, value) = results.into_iter().nth(idx).expect("at least one start");
    Ok(AcqOutcome {
        x,
        value,
        sobol_fallback: false,
    })
}

/// Acquisition value at `x` (not defined for Thompson sampling).
pub fn acquisition_value(gp: &FittedGp, spec: &AcquisitionSpec, x: &[f64]) -> Result<f64> {
    if matches!(spec, AcquisitionSpec::Ts { .. }) {
        return Err(invalid(
            "Thompson sampling has no closed-form acquisition value",
        ));
    }
    crate::error::check_dim(gp.dim(), x.len())?;
    Ok(value_and_grad(gp, spec, gp.data().y().max(), x).0)
}

//! Exact Gaussian-process regression with ARD squared-exponential and
//! Matérn-5/2 kernels.
//!
//! Both kernels are functions of the scaled distance
//! `ρ = sqrt(Σ_k (x_k − x'_k)² / ℓ_k²)`:
//!
//! * SE: `a · exp(−ρ²)`
//! * Matérn-5/2: `a · (1 + √5ρ + 5ρ²/3) · exp(−√5ρ)`
//!
//! Internally every kernel is handled through its value and its slope with
//! respect to `ρ²`, which gives the length-scale and input derivatives in one
//! place: `∂κ/∂ℓ_k = 2s·Δ_k²/ℓ_k³` and `∂κ/∂x_k = −2s·Δ_k/ℓ_k²` where
//! `s = −∂κ/∂ρ²`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;

/// Floor on the observation-noise variance (on standardized outputs).
pub const NOISE_VAR_MIN: f64 = 1e-6;

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "se")]
    SquaredExponential,
    #[serde(rename = "matern52")]
    Matern52,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::SquaredExponential => "se",
            KernelKind::Matern52 => "matern52",
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" | "rbf" | "squared_exponential" => Ok(KernelKind::SquaredExponential),
            "matern52" | "matern" | "matern-5/2" => Ok(KernelKind::Matern52),
            other => Err(invalid(format!(
                "unknown kernel `{other}` (expected se or matern52)"
            ))),
        }
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthScaleMode {
    Ard,
    Isotropic,
}

/// Per-dimension (ARD) or shared length-scales. Every entry is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthScales {
    mode: LengthScaleMode,
    values: Vec<f64>,
}

impl LengthScales {
    pub fn ard(values: Vec<f64>) -> Result<Self> {
        Self::new(LengthScaleMode::Ard, values)
    }

    pub fn isotropic(value: f64) -> Result<Self> {
        Self::new(LengthScaleMode::Isotropic, vec![value])
    }

    pub fn new(mode: LengthScaleMode, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("length-scales must not be empty"));
        }
        if mode == LengthScaleMode::Isotropic && values.len() != 1 {
            return Err(invalid("isotropic length-scales hold exactly one value"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(invalid(format!("length-scales must be positive, got {v}")));
        }
        Ok(Self { mode, values })
    }

    pub fn mode(&self) -> LengthScaleMode {
        self.mode
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Length-scale of input dimension `k`.
    pub fn get(&self, k: usize) -> f64 {
        match self.mode {
            LengthScaleMode::Ard => self.values[k],
            LengthScaleMode::Isotropic => self.values[0],
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self.mode {
            LengthScaleMode::Ard => check_dim(d, self.values.len()),
            LengthScaleMode::Isotropic => Ok(()),
        }
    }

    /// `1/ℓ_k²` expanded to `d` dimensions.
    pub fn inverse_squares(&self, d: usize) -> Result<Vec<f64>> {
        self.check_dim(d)?;
        Ok((0..d).map(|k| self.get(k).powi(-2)).collect())
    }

    /// Expands to one value per input dimension.
    pub fn expanded(&self, d: usize) -> Vec<f64> {
        (0..d).map(|k| self.get(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub kind: KernelKind,
    pub amplitude: f64,
    pub lengthscales: LengthScales,
}

impl KernelParams {
    pub fn new(kind: KernelKind, amplitude: f64, lengthscales: LengthScales) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(invalid(format!(
                "amplitude must be positive, got {amplitude}"
            )));
        }
        Ok(Self {
            kind,
            amplitude,
            lengthscales,
        })
    }

    /// Kernel value and slope `s = −∂κ/∂ρ²` at squared scaled distance `rho2`.
    #[inline]
    pub(crate) fn profile(&self, rho2: f64) -> (f64, f64) {
        kernel_profile(self.kind, self.amplitude, rho2)
    }
}

#[inline]
fn kernel_profile(kind: KernelKind, a: f64, rho2: f64) -> (f64, f64) {
    match kind {
        KernelKind::SquaredExponential => {
            let k = a * (-rho2).exp();
            (k, k)
        }
        KernelKind::Matern52 => {
            let r = rho2.sqrt();
            let e = (-SQRT5 * r).exp();
            let k = a * (1.0 + SQRT5 * r + 5.0 * rho2 / 3.0) * e;
            let s = (5.0 * a / 6.0) * (1.0 + SQRT5 * r) * e;
            (k, s)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub kernel: KernelParams,
    pub mean: f64,
    pub noise_var: f64,
}

impl GpHyperparams {
    pub fn new(kernel: KernelParams, mean: f64, noise_var: f64) -> Result<Self> {
        if !(noise_var.is_finite() && noise_var >= NOISE_VAR_MIN) {
            return Err(invalid(format!(
                "noise variance must be at least {NOISE_VAR_MIN:e}, got {noise_var}"
            )));
        }
        if !mean.is_finite() {
            return Err(invalid("mean must be finite"));
        }
        Ok(Self {
            kernel,
            mean,
            noise_var,
        })
    }
}

/// Training inputs in `[0,1]^d` (one row per observation) and their outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

const UNIT_SLACK: f64 = 1e-12;

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(invalid("dataset needs at least one observation"));
        }
        if x.ncols() == 0 {
            return Err(invalid("dataset needs at least one input dimension"));
        }
        check_dim(x.nrows(), y.len())?;
        if let Some(v) = x
            .iter()
            .find(|v| !(v.is_finite() && **v >= -UNIT_SLACK && **v <= 1.0 + UNIT_SLACK))
        {
            return Err(invalid(format!("inputs must lie in [0,1], found {v}")));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("outputs must be finite, found {v}")));
        }
        Ok(Self { x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
        let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(x, DVector::from_column_slice(y))
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        linalg::row_vec(&self.x, i)
    }
}

/// Affine map from raw outputs to the scale the model is fitted on:
/// `internal = (raw − shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputScaling {
    pub shift: f64,
    pub scale: f64,
}

impl Default for OutputScaling {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl OutputScaling {
    pub const IDENTITY: Self = Self {
        shift: 0.0,
        scale: 1.0,
    };

    /// Zero-mean, unit-variance standardization of `y`. A constant `y` keeps
    /// unit scale.
    pub fn standardize(y: &DVector<f64>) -> Self {
        let n = y.len() as f64;
        let mean = y.mean();
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        Self {
            shift: mean,
            scale: if sd > 1e-12 * mean.abs().max(1.0) {
                sd
            } else {
                1.0
            },
        }
    }

    pub fn forward(&self, raw: f64) -> f64 {
        (raw - self.shift) / self.scale
    }

    pub fn inverse(&self, internal: f64) -> f64 {
        internal * self.scale + self.shift
    }
}

/// Posterior mean and (clamped, non-negative) variance of the latent function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

impl Posterior {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Gradient of the log marginal likelihood with respect to each hyperparameter
/// in constrained space. `lengthscales` has one entry per ARD dimension (or a
/// single entry for isotropic kernels).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGradient {
    pub lengthscales: Vec<f64>,
    pub amplitude: f64,
    pub noise_var: f64,
    pub mean: f64,
}

impl HyperGradient {
    pub fn lengthscale_norm(&self) -> f64 {
        self.lengthscales.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Scaled distance `ρ` between two points.
pub fn scaled_distance(x: &[f64], y: &[f64], ls: &LengthScales) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    let w = ls.inverse_squares(x.len())?;
    Ok(linalg::weighted_sq_dist(x, y, &w).sqrt())
}

fn rho2(x: &[f64], y: &[f64], params: &KernelParams) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    let w = params.lengthscales.inverse_squares(x.len())?;
    Ok(linalg::weighted_sq_dist(x, y, &w))
}

/// Evaluates the kernel named by `params.kind`.
pub fn kernel(x: &[f64], y: &[f64], params: &KernelParams) -> Result<f64> {
    Ok(params.profile(rho2(x, y, params)?).0)
}

pub fn kernel_se(x: &[f64], y: &[f64], params: &KernelParams) -> Result<f64> {
    if params.kind != KernelKind::SquaredExponential {
        return Err(invalid("kernel_se called with non-SE parameters"));
    }
    kernel(x, y, params)
}

pub fn kernel_matern52(x: &[f64], y: &[f64], params: &KernelParams) -> Result<f64> {
    if params.kind != KernelKind::Matern52 {
        return Err(invalid("kernel_matern52 called with non-Matérn parameters"));
    }
    kernel(x, y, params)
}

/// `∂κ(x, y)/∂ℓ_k` for every input dimension `k`.
pub fn kernel_lengthscale_grad(x: &[f64], y: &[f64], params: &KernelParams) -> Result<Vec<f64>> {
    let (_, s) = params.profile(rho2(x, y, params)?);
    Ok(x.iter()
        .zip(y)
        .enumerate()
        .map(|(k, (a, b))| {
            let l = params.lengthscales.get(k);
            2.0 * s * (a - b).powi(2) / (l * l * l)
        })
        .collect())
}

/// Kernel matrix on the rows of `x`. Exactly symmetric, diagonal equal to the amplitude.
pub fn kernel_matrix(x: &DMatrix<f64>, params: &KernelParams) -> Result<DMatrix<f64>> {
    Ok(kernel_and_slope(x, params)?.0)
}

fn kernel_and_slope(
    x: &DMatrix<f64>,
    params: &KernelParams,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let w = params.lengthscales.inverse_squares(x.ncols())?;
    let r2 = linalg::sq_dist_matrix(x, &w);
    let n = x.nrows();
    let mut k = DMatrix::zeros(n, n);
    let mut s = DMatrix::zeros(n, n);
    for (idx, r) in r2.iter().enumerate() {
        let (kv, sv) = params.profile(*r);
        k[idx] = kv;
        s[idx] = sv;
    }
    Ok((k, s))
}

/// Cross-covariance between the rows of `a` (M×d) and `b` (N×d).
pub fn cross_kernel_matrix(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    params: &KernelParams,
) -> Result<DMatrix<f64>> {
    check_dim(b.ncols(), a.ncols())?;
    let w = params.lengthscales.inverse_squares(a.ncols())?;
    let mut m = linalg::cross_sq_dist(a, b, &w);
    m.iter_mut().for_each(|v| *v = params.profile(*v).0);
    Ok(m)
}

/// A GP conditioned on a dataset: hyperparameters plus the cached Cholesky
/// factor of `K + σ²I` and the dual weights `α = (K + σ²I)⁻¹(y − m)`.
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct FittedGp {
    hyper: GpHyperparams,
    data: Dataset,
    scaling: OutputScaling,
    targets: DVector<f64>,
    kernel: DMatrix<f64>,
    slope: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl FittedGp {
    /// Conditions on `data` with outputs used as given.
    pub fn new(hyper: GpHyperparams, data: Dataset) -> Result<Self> {
        Self::with_scaling(hyper, data, OutputScaling::IDENTITY)
    }

    /// Conditions on `data` after mapping outputs through `scaling`. Predictions
    /// are reported back on the raw output scale.
    pub fn with_scaling(
        hyper: GpHyperparams,
        data: Dataset,
        scaling: OutputScaling,
    ) -> Result<Self> {
        hyper.kernel.lengthscales.check_dim(data.dim())?;
        let targets = data.y.map(|v| scaling.forward(v));
        let (kernel, slope) = kernel_and_slope(&data.x, &hyper.kernel)?;
        let mut cov = kernel.clone();
        for i in 0..cov.nrows() {
            cov[(i, i)] += hyper.noise_var;
        }
        let (chol, jitter) = linalg::cholesky_with_jitter(&cov, hyper.kernel.amplitude)?;
        let resid = targets.add_scalar(-hyper.mean);
        let alpha = chol.solve(&resid);
        Ok(Self {
            hyper,
            data,
            scaling,
            targets,
            kernel,
            slope,
            chol_l: chol.unpack(),
            alpha,
            jitter,
        })
    }

    pub fn hyper(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn scaling(&self) -> OutputScaling {
        self.scaling
    }

    /// Outputs on the internal (fitted) scale.
    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn chol_l(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Diagonal jitter added beyond `σ²` to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// `log N(y | m·1, K + σ²I)` on the internal output scale.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.targets.len() as f64;
        let resid = self.targets.add_scalar(-self.hyper.mean);
        let fit = -0.5 * resid.dot(&self.alpha);
        let logdet: f64 = self.chol_l.diagonal().iter().map(|v| v.ln()).sum();
        fit - logdet - 0.5 * n * (2.0 * PI).ln()
    }

    /// Analytic gradient of [`Self::log_marginal_likelihood`]:
    /// `∂/∂θ = ½ tr(A ∂K/∂θ)` with `A = ααᵀ − (K + σ²I)⁻¹`.
    pub fn lml_gradient(&self) -> HyperGradient {
        let n = self.targets.len();
        let d = self.dim();
        let cinv = linalg::cholesky_inverse(&self.chol_l);
        let mut a = &self.alpha * self.alpha.transpose();
        a -= &cinv;

        let amp = self.hyper.kernel.amplitude;
        let amplitude = 0.5 * a.component_mul(&self.kernel).sum() / amp;
        let noise_var = 0.5 * a.trace();
        let mean = self.alpha.sum();

        // Σ_ij W_ij (x_ik − x_jk)² with W = A∘S, expanded so the inner sums are
        // matrix products; inputs are centered first to limit cancellation.
        let mut w = a.component_mul(&self.slope);
        for i in 0..n {
            w[(i, i)] = 0.0;
        }
        let center = linalg::column_means(&self.data.x);
        let mut xc = self.data.x.clone();
        for (k, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-center[k]);
        }
        let row_sums: DVector<f64> = w.column_sum();
        let wx = &w * &xc;
        let pair_sums: Vec<f64> = (0..d)
            .map(|k| {
                let col = xc.column(k);
                let sq: f64 = col
                    .iter()
                    .zip(row_sums.iter())
                    .map(|(x, r)| x * x * r)
                    .sum();
                let cross = col.dot(&wx.column(k));
                2.0 * (sq - cross)
            })
            .collect();

        let ls = &self.hyper.kernel.lengthscales;
        let lengthscales = match ls.mode() {
            LengthScaleMode::Ard => pair_sums
                .iter()
                .enumerate()
                .map(|(k, s)| s / ls.get(k).powi(3))
                .collect(),
            LengthScaleMode::Isotropic => vec![pair_sums.iter().sum::<f64>() / ls.get(0).powi(3)],
        };

        HyperGradient {
            lengthscales,
            amplitude,
            noise_var,
            mean,
        }
    }

    fn cross_with_slope(&self, x: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        check_dim(self.dim(), x.len())?;
        let w = self.hyper.kernel.lengthscales.inverse_squares(x.len())?;
        let n = self.data.len();
        let mut k = DVector::zeros(n);
        let mut s = DVector::zeros(n);
        for i in 0..n {
            let r2: f64 = (0..x.len())
                .map(|c| {
                    let dlt = x[c] - self.data.x[(i, c)];
                    w[c] * dlt * dlt
                })
                .sum();
            let (kv, sv) = self.hyper.kernel.profile(r2);
            k[i] = kv;
            s[i] = sv;
        }
        Ok((k, s))
    }

    /// Latent mean and unclamped variance on the internal scale.
    fn latent(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (k, _) = self.cross_with_slope(x)?;
        let mean = self.hyper.mean + k.dot(&self.alpha);
        let v = linalg::solve_lower(&self.chol_l, &k);
        Ok((mean, self.hyper.kernel.amplitude - v.norm_squared()))
    }

    /// Posterior variance before clamping at zero, on the raw output scale.
    pub fn unclamped_variance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.latent(x)?.1 * self.scaling.scale.powi(2))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Posterior> {
        let (m, v) = self.latent(x)?;
        Ok(Posterior {
            mean: self.scaling.inverse(m),
            variance: v.max(0.0) * self.scaling.scale.powi(2),
        })
    }

    /// Posterior at `x` plus the gradients of its mean and variance with
    /// respect to `x`, all on the raw output scale.
    pub fn predict_with_gradient(&self, x: &[f64]) -> Result<(Posterior, Vec<f64>, Vec<f64>)> {
        let d = self.dim();
        let (k, s) = self.cross_with_slope(x)?;
        let mean = self.hyper.mean + k.dot(&self.alpha);
        let v = linalg::solve_lower(&self.chol_l, &k);
        let var = self.hyper.kernel.amplitude - v.norm_squared();
        // (K + σ²I)⁻¹ k*
        let beta = self
            .chol_l
            .tr_solve_lower_triangular(&v)
            .expect("positive diagonal");
        let ls = &self.hyper.kernel.lengthscales;
        let mut dmu = vec![0.0; d];
        let mut dvar = vec![0.0; d];
        for i in 0..self.data.len() {
            let (wa, wb) = (self.alpha[i] * s[i], beta[i] * s[i]);
            if wa == 0.0 && wb == 0.0 {
                continue;
            }
            for c in 0..d {
                let dk = -2.0 * (x[c] - self.data.x[(i, c)]) / ls.get(c).powi(2);
                dmu[c] += wa * dk;
                dvar[c] -= 2.0 * wb * dk;
            }
        }
        let sc = self.scaling.scale;
        dmu.iter_mut().for_each(|g| *g *= sc);
        if var > 0.0 {
            dvar.iter_mut().for_each(|g| *g *= sc * sc);
        } else {
            dvar.iter_mut().for_each(|g| *g = 0.0);
        }
        Ok((
            Posterior {
                mean: self.scaling.inverse(mean),
                variance: var.max(0.0) * sc * sc,
            },
            dmu,
            dvar,
        ))
    }

    /// Gradients `(∂μ/∂x, ∂v/∂x)` of the posterior mean and variance.
    pub fn predict_gradient(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (_, dmu, dvar) = self.predict_with_gradient(x)?;
        Ok((dmu, dvar))
    }

    /// Joint posterior over the rows of `points`: mean vector and covariance
    /// matrix on the raw output scale.
    pub fn joint_posterior(&self, points: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let params = &self.hyper.kernel;
        let kxs = cross_kernel_matrix(&self.data.x, points, params)?;
        let mean = (kxs.tr_mul(&self.alpha)).add_scalar(self.hyper.mean);
        let v = self
            .chol_l
            .solve_lower_triangular(&kxs)
            .expect("positive diagonal");
        let mut cov = kernel_matrix(points, params)?;
        cov -= v.transpose() * &v;
        linalg::symmetrize(&mut cov);
        let sc = self.scaling.scale;
        Ok((mean.map(|m| self.scaling.inverse(m)), cov * (sc * sc)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn se(a: f64, ls: LengthScales) -> KernelParams {
        KernelParams::new(KernelKind::SquaredExponential, a, ls).unwrap()
    }

    fn mat(a: f64, ls: LengthScales) -> KernelParams {
        KernelParams::new(KernelKind::Matern52, a, ls).unwrap()
    }

    #[test]
    fn scaled_distance_cases() {
        let ard = LengthScales::ard(vec![1.0, 1.0]).unwrap();
        assert_eq!(
            scaled_distance(&[0.3, 0.2], &[0.3, 0.2], &ard).unwrap(),
            0.0
        );
        assert_eq!(
            scaled_distance(&[1.0, 0.0], &[0.0, 0.0], &ard).unwrap(),
            1.0
        );
        let iso = LengthScales::isotropic(0.5).unwrap();
        let r = scaled_distance(&[1.0, 1.0], &[0.0, 0.0], &iso).unwrap();
        assert!((r - 2.0_f64.sqrt() / 0.5).abs() < 1e-12);
        assert!(matches!(
            scaled_distance(&[1.0], &[0.0, 0.0], &iso),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            scaled_distance(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0], &ard),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn se_values() {
        let p = se(2.5, LengthScales::isotropic(1.0).unwrap());
        assert_eq!(kernel_se(&[0.4], &[0.4], &p).unwrap(), 2.5);
        let p = se(1.0, LengthScales::isotropic(1.0).unwrap());
        assert!((kernel_se(&[1.0], &[0.0], &p).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        // ρ = 6.58: the value is tiny but far from zero in float64.
        let k = kernel_se(&[6.58], &[0.0], &p).unwrap();
        assert!((k / (-43.2964f64).exp() - 1.0).abs() < 1e-12);
        assert!(k > 1e-19 && k < 2e-19);
        assert!(kernel_matern52(&[1.0], &[0.0], &p).is_err());
    }

    #[test]
    fn matern_values() {
        let p = mat(1.0, LengthScales::isotropic(1.0).unwrap());
        assert_eq!(kernel_matern52(&[0.2], &[0.2], &p).unwrap(), 1.0);
        let want = (1.0 + 5f64.sqrt() + 5.0 / 3.0) * (-(5f64.sqrt())).exp();
        let got = kernel_matern52(&[1.0], &[0.0], &p).unwrap();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.52399).abs() < 1e-5);
        let p3 = mat(3.0, LengthScales::isotropic(1.0).unwrap());
        assert!((kernel_matern52(&[1.0], &[0.0], &p3).unwrap() - 3.0 * got).abs() < 1e-14);
        assert!(kernel_se(&[1.0], &[0.0], &p).is_err());
    }

    #[test]
    fn kernel_matrix_small_cases() {
        let p = se(1.7, LengthScales::ard(vec![0.3, 0.8]).unwrap());
        let one = DMatrix::from_row_slice(1, 2, &[0.1, 0.9]);
        assert_eq!(
            kernel_matrix(&one, &p).unwrap(),
            DMatrix::from_element(1, 1, 1.7)
        );
        let two = DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 0.1, 0.9]);
        assert_eq!(
            kernel_matrix(&two, &p).unwrap(),
            DMatrix::from_element(2, 2, 1.7)
        );
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::from_rows(&[vec![0.5, 1.2]], &[1.0]).is_err());
        assert!(Dataset::from_rows(&[vec![0.5, 1.0 + 1e-13]], &[1.0]).is_ok());
        assert!(Dataset::from_rows(&[vec![0.5], vec![0.5, 0.5]], &[1.0, 2.0]).is_err());
        assert!(Dataset::new(DMatrix::zeros(2, 1), DVector::zeros(3)).is_err());
        assert!(Dataset::from_rows(&[], &[]).is_err());
    }

    #[test]
    fn hyperparams_enforce_noise_floor() {
        let k = se(1.0, LengthScales::isotropic(1.0).unwrap());
        assert!(GpHyperparams::new(k.clone(), 0.0, 1e-7).is_err());
        assert!(GpHyperparams::new(k, 0.0, 1e-6).is_ok());
        assert!(LengthScales::ard(vec![1.0, 0.0]).is_err());
        assert!(KernelParams::new(
            KernelKind::Matern52,
            -1.0,
            LengthScales::isotropic(1.0).unwrap()
        )
        .is_err());
    }

    fn single_point_gp(y: f64, noise: f64) -> FittedGp {
        let k = se(1.0 - noise, LengthScales::isotropic(1.0).unwrap());
        let h = GpHyperparams::new(k, 0.0, noise).unwrap();
        FittedGp::new(h, Dataset::from_rows(&[vec![0.5]], &[y]).unwrap()).unwrap()
    }

    #[test]
    fn lml_single_point() {
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        let gp = single_point_gp(0.0, 0.25);
        assert!((gp.log_marginal_likelihood() + half_log_2pi).abs() < 1e-12);
        let gp = single_point_gp(2.0, 0.25);
        assert!((gp.log_marginal_likelihood() + 2.0 + half_log_2pi).abs() < 1e-12);
        let g = gp.lml_gradient();
        assert_eq!(g.lengthscales, vec![0.0]);
    }

    #[test]
    fn prior_reversion_far_from_data() {
        let k = se(1.3, LengthScales::isotropic(0.05).unwrap());
        let h = GpHyperparams::new(k, 0.4, 1e-4).unwrap();
        let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![0.05, 0.0]], &[1.0, -1.0]).unwrap();
        let gp = FittedGp::new(h, data).unwrap();
        let p = gp.predict(&[1.0, 1.0]).unwrap();
        assert!((p.mean - 0.4).abs() < 1e-6);
        assert!((p.variance - 1.3).abs() < 1e-6);
    }

    #[test]
    fn near_interpolation_at_training_input() {
        let k = mat(1.0, LengthScales::ard(vec![0.3, 0.3]).unwrap());
        let h = GpHyperparams::new(k, 0.0, NOISE_VAR_MIN).unwrap();
        let rows = vec![vec![0.1, 0.2], vec![0.8, 0.3], vec![0.5, 0.9]];
        let y = [0.7, -0.2, 1.1];
        let gp = FittedGp::new(h, Dataset::from_rows(&rows, &y).unwrap()).unwrap();
        for (r, yv) in rows.iter().zip(y) {
            let p = gp.predict(r).unwrap();
            assert!((p.mean - yv).abs() < 1e-3);
            assert!(p.variance <= 1e-3);
        }
    }

    #[test]
    fn mirrored_training_points_give_zero_axial_mean_gradient() {
        let k = se(1.0, LengthScales::ard(vec![0.4, 0.6]).unwrap());
        let h = GpHyperparams::new(k, 0.0, 1e-3).unwrap();
        let data = Dataset::from_rows(&[vec![0.3, 0.5], vec![0.7, 0.5]], &[1.0, 1.0]).unwrap();
        let gp = FittedGp::new(h, data).unwrap();
        let (dmu, dvar) = gp.predict_gradient(&[0.5, 0.5]).unwrap();
        assert!(dmu[0].abs() < 1e-14);
        assert!(dvar[0].abs() < 1e-14);
    }

    #[test]
    fn scaling_round_trip() {
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0]);
        let s = OutputScaling::standardize(&y);
        assert!((s.inverse(s.forward(4.2)) - 4.2).abs() < 1e-14);
        let c = OutputScaling::standardize(&DVector::from_element(4, 3.0));
        assert_eq!(c.scale, 1.0);
        assert_eq!(c.forward(3.0), 0.0);
    }
}

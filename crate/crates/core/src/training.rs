//! Hyperparameter estimation for [`FittedGp`].
//!
//! Positive parameters are optimized in SoftPlus-inverse ("raw") space with a
//! first-order optimizer on `−(LML + log prior)`. Outputs are standardized to
//! zero mean and unit variance before fitting and the constant mean is held at
//! zero on that scale.

use std::f64::consts::PI;

use libm::lgamma as ln_gamma;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gp::{
    Dataset, FittedGp, GpHyperparams, KernelKind, KernelParams, LengthScaleMode, LengthScales,
    OutputScaling, NOISE_VAR_MIN,
};

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 30.0);
pub const AMPLITUDE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const NOISE_BOUNDS: (f64, f64) = (NOISE_VAR_MIN, 1e2);

pub const INIT_AMPLITUDE: f64 = 1.0;
pub const INIT_NOISE_VAR: f64 = 0.01;

/// Early stopping: the raw gradient ∞-norm must stay below this for
/// [`EARLY_STOP_PATIENCE`] consecutive epochs.
pub const EARLY_STOP_TOL: f64 = 1e-9;
pub const EARLY_STOP_PATIENCE: usize = 20;

/// `log(1 + eˣ)`, returning `x` itself once `eˣ` swamps the 1.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`]; `y` must be positive.
pub fn inv_softplus(y: f64) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(invalid(format!(
            "inv_softplus needs a positive argument, got {y}"
        )));
    }
    Ok(if y > 30.0 { y } else { y.exp_m1().ln() })
}

/// Derivative of [`softplus`] (the logistic function).
fn softplus_grad(x: f64) -> f64 {
    if x > 30.0 {
        1.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    /// Every length-scale starts at the same value.
    Constant { value: f64 },
    /// Every length-scale starts at `c·√d`.
    RobustSqrtD { c: f64 },
}

impl InitStrategy {
    /// The SoftPlus(0) initialization common in GP libraries.
    pub const SOFTPLUS_ZERO: InitStrategy = InitStrategy::Constant {
        value: std::f64::consts::LN_2,
    };

    pub fn validate(&self) -> Result<()> {
        let v = match self {
            InitStrategy::Constant { value } => *value,
            InitStrategy::RobustSqrtD { c } => *c,
        };
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(invalid(format!(
                "length-scale initialization must be positive, got {v}"
            )))
        }
    }

    pub fn value_for_dim(&self, d: usize) -> f64 {
        match self {
            InitStrategy::Constant { value } => *value,
            InitStrategy::RobustSqrtD { c } => c * (d as f64).sqrt(),
        }
    }
}

impl std::str::FromStr for InitStrategy {
    type Err = Error;

    /// Parses `robust:<c>`, `const:<value>` or a bare number (constant).
    fn from_str(s: &str) -> Result<Self> {
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("bad length-scale init `{s}`")))
        };
        let strategy = if let Some(rest) = s.strip_prefix("robust:") {
            InitStrategy::RobustSqrtD { c: parse(rest)? }
        } else if s == "robust" || s == "sqrt" {
            InitStrategy::RobustSqrtD { c: 1.0 }
        } else if let Some(rest) = s.strip_prefix("const:") {
            InitStrategy::Constant {
                value: parse(rest)?,
            }
        } else {
            InitStrategy::Constant { value: parse(s)? }
        };
        strategy.validate()?;
        Ok(strategy)
    }
}

impl std::fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitStrategy::Constant { value } => write!(f, "const:{value}"),
            InitStrategy::RobustSqrtD { c } => write!(f, "robust:{c}"),
        }
    }
}

pub fn init_lengthscales(
    strategy: InitStrategy,
    d: usize,
    mode: LengthScaleMode,
) -> Result<LengthScales> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    strategy.validate()?;
    let v = strategy.value_for_dim(d);
    match mode {
        LengthScaleMode::Ard => LengthScales::ard(vec![v; d]),
        LengthScaleMode::Isotropic => LengthScales::isotropic(v),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    #[default]
    None,
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Shape/rate parameterization.
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// `LogNormal(mu0 + log(d)/2, sigma0)`.
    LogNormalDim {
        mu0: f64,
        sigma0: f64,
    },
}

impl Prior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Prior::None => true,
            Prior::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Prior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
            Prior::LogNormalDim { mu0, sigma0 } => mu0.is_finite() && sigma0 > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid prior {self:?}")))
        }
    }

    /// Log density at `x` and its derivative. Outside the support the value is
    /// `−∞` with zero derivative.
    pub fn log_density(&self, x: f64, d: usize) -> (f64, f64) {
        match *self {
            Prior::None => (0.0, 0.0),
            Prior::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    (-(hi - lo).ln(), 0.0)
                } else {
                    (f64::NEG_INFINITY, 0.0)
                }
            }
            Prior::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return (f64::NEG_INFINITY, 0.0);
                }
                let v = shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x;
                (v, (shape - 1.0) / x - rate)
            }
            Prior::LogNormalDim { mu0, sigma0 } => {
                if x <= 0.0 {
                    return (f64::NEG_INFINITY, 0.0);
                }
                let mu = mu0 + 0.5 * (d as f64).ln();
                let z = (x.ln() - mu) / sigma0;
                let v = -x.ln() - sigma0.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * z * z;
                (v, -(1.0 + z / sigma0) / x)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PriorSpec {
    pub lengthscale: Prior,
    pub amplitude: Prior,
    pub noise_var: Prior,
}

impl PriorSpec {
    pub const NONE: PriorSpec = PriorSpec {
        lengthscale: Prior::None,
        amplitude: Prior::None,
        noise_var: Prior::None,
    };

    /// Diffuse priors used for MAP training: Uniform(0.001, 30) on each
    /// length-scale, Gamma(2, 0.15) on the amplitude, Gamma(1.1, 0.05) on the noise.
    pub const MAP_DEFAULT: PriorSpec = PriorSpec {
        lengthscale: Prior::Uniform {
            lo: 0.001,
            hi: 30.0,
        },
        amplitude: Prior::Gamma {
            shape: 2.0,
            rate: 0.15,
        },
        noise_var: Prior::Gamma {
            shape: 1.1,
            rate: 0.05,
        },
    };

    pub fn validate(&self) -> Result<()> {
        self.lengthscale.validate()?;
        self.amplitude.validate()?;
        self.noise_var.validate()
    }
}

/// Log prior value and gradient in constrained space, laid out like
/// [`crate::gp::HyperGradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogPrior {
    pub value: f64,
    pub lengthscales: Vec<f64>,
    pub amplitude: f64,
    pub noise_var: f64,
}

pub fn log_prior(hyper: &GpHyperparams, priors: &PriorSpec, d: usize) -> LogPrior {
    let mut value = 0.0;
    let lengthscales = hyper
        .kernel
        .lengthscales
        .values()
        .iter()
        .map(|&l| {
            let (v, g) = priors.lengthscale.log_density(l, d);
            value += v;
            g
        })
        .collect();
    let (va, amplitude) = priors.amplitude.log_density(hyper.kernel.amplitude, d);
    let (vn, noise_var) = priors.noise_var.log_density(hyper.noise_var, d);
    LogPrior {
        value: value + va + vn,
        lengthscales,
        amplitude,
        noise_var,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerSpec {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        epochs: usize,
    },
    RmsProp {
        lr: f64,
        decay: f64,
        eps: f64,
        epochs: usize,
    },
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self::adam(1500)
    }
}

impl OptimizerSpec {
    pub fn adam(epochs: usize) -> Self {
        OptimizerSpec::Adam {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs,
        }
    }

    pub fn rmsprop(epochs: usize) -> Self {
        OptimizerSpec::RmsProp {
            lr: 0.01,
            decay: 0.99,
            eps: 1e-8,
            epochs,
        }
    }

    pub fn epochs(&self) -> usize {
        match self {
            OptimizerSpec::Adam { epochs, .. } | OptimizerSpec::RmsProp { epochs, .. } => *epochs,
        }
    }

    pub fn with_epochs(self, n: usize) -> Self {
        match self {
            OptimizerSpec::Adam {
                lr,
                beta1,
                beta2,
                eps,
                ..
            } => OptimizerSpec::Adam {
                lr,
                beta1,
                beta2,
                eps,
                epochs: n,
            },
            OptimizerSpec::RmsProp { lr, decay, eps, .. } => OptimizerSpec::RmsProp {
                lr,
                decay,
                eps,
                epochs: n,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lr, epochs) = match *self {
            OptimizerSpec::Adam { lr, epochs, .. } | OptimizerSpec::RmsProp { lr, epochs, .. } => {
                (lr, epochs)
            }
        };
        if lr > 0.0 && epochs >= 1 {
            Ok(())
        } else {
            Err(invalid("optimizer needs lr > 0 and at least one epoch"))
        }
    }
}

enum OptState {
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
    RmsProp { v: Vec<f64> },
}

impl OptState {
    fn new(spec: &OptimizerSpec, n: usize) -> Self {
        match spec {
            OptimizerSpec::Adam { .. } => OptState::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
            OptimizerSpec::RmsProp { .. } => OptState::RmsProp { v: vec![0.0; n] },
        }
    }

    /// One descent step on `params` given the gradient of the minimized objective.
    fn step(&mut self, spec: &OptimizerSpec, params: &mut [f64], grad: &[f64]) {
        match (self, *spec) {
            (
                OptState::Adam { m, v, t },
                OptimizerSpec::Adam {
                    lr,
                    beta1,
                    beta2,
                    eps,
                    ..
                },
            ) => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for i in 0..params.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
            (OptState::RmsProp { v }, OptimizerSpec::RmsProp { lr, decay, eps, .. }) => {
                for i in 0..params.len() {
                    v[i] = decay * v[i] + (1.0 - decay) * grad[i] * grad[i];
                    params[i] -= lr * grad[i] / (v[i].sqrt() + eps);
                }
            }
            _ => unreachable!("optimizer state matches its spec"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    #[default]
    Mle,
    Map,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kernel: KernelKind,
    pub lengthscale_mode: LengthScaleMode,
    pub init: InitStrategy,
    pub mode: TrainMode,
    pub optimizer: OptimizerSpec,
    pub priors: PriorSpec,
}

impl TrainConfig {
    pub fn new(kernel: KernelKind, init: InitStrategy) -> Self {
        Self {
            kernel,
            lengthscale_mode: LengthScaleMode::Ard,
            init,
            mode: TrainMode::Mle,
            optimizer: OptimizerSpec::default(),
            priors: PriorSpec::MAP_DEFAULT,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.optimizer = self.optimizer.with_epochs(epochs);
        self
    }

    fn active_priors(&self) -> PriorSpec {
        match self.mode {
            TrainMode::Mle => PriorSpec::NONE,
            TrainMode::Map => self.priors,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.init.validate()?;
        self.optimizer.validate()?;
        self.priors.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// L2 norm of the marginal-likelihood gradient over the length-scale block,
    /// in constrained space, at the initialization point.
    pub initial_grad_norm: f64,
    /// `‖ℓ_trained − ℓ_init‖ / ‖ℓ_init‖`.
    pub ls_rel_diff: f64,
    /// Minimized objective `−(LML + log prior)` at the returned state.
    pub final_objective: f64,
    pub initial_objective: f64,
    pub epochs_run: usize,
    /// Set for single-observation data, where the length-scale gradient is
    /// identically zero.
    pub zero_lengthscale_gradient: bool,
}

struct Layout {
    n_ls: usize,
}

impl Layout {
    fn amp(&self) -> usize {
        self.n_ls
    }
    fn noise(&self) -> usize {
        self.n_ls + 1
    }
    fn len(&self) -> usize {
        self.n_ls + 2
    }
}

fn clamp(v: f64, (lo, hi): (f64, f64)) -> f64 {
    v.clamp(lo, hi)
}

fn build_hyper(
    raw: &mut [f64],
    layout: &Layout,
    kind: KernelKind,
    mode: LengthScaleMode,
) -> Result<GpHyperparams> {
    let mut ls = Vec::with_capacity(layout.n_ls);
    for r in raw.iter_mut().take(layout.n_ls) {
        let l = clamp(softplus(*r), LENGTHSCALE_BOUNDS);
        *r = inv_softplus(l)?;
        ls.push(l);
    }
    let a = clamp(softplus(raw[layout.amp()]), AMPLITUDE_BOUNDS);
    raw[layout.amp()] = inv_softplus(a)?;
    let s2 = clamp(softplus(raw[layout.noise()]), NOISE_BOUNDS);
    raw[layout.noise()] = inv_softplus(s2)?;
    let kernel = KernelParams::new(kind, a, LengthScales::new(mode, ls)?)?;
    GpHyperparams::new(kernel, 0.0, s2)
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den
}

/// Fits GP hyperparameters to `data` and returns the model at the lowest
/// objective seen during optimization.
pub fn fit(data: &Dataset, cfg: &TrainConfig) -> Result<(FittedGp, TrainReport)> {
    cfg.validate()?;
    let d = data.dim();
    let priors = cfg.active_priors();
    let scaling = OutputScaling::standardize(data.y());
    let init_ls = init_lengthscales(cfg.init, d, cfg.lengthscale_mode)?;
    let ls_init: Vec<f64> = init_ls
        .values()
        .iter()
        .map(|&l| clamp(l, LENGTHSCALE_BOUNDS))
        .collect();
    let layout = Layout {
        n_ls: ls_init.len(),
    };

    let mut raw = Vec::with_capacity(layout.len());
    for &l in &ls_init {
        raw.push(inv_softplus(l)?);
    }
    raw.push(inv_softplus(INIT_AMPLITUDE)?);
    raw.push(inv_softplus(INIT_NOISE_VAR)?);

    let epochs = cfg.optimizer.epochs();
    let mut opt = OptState::new(&cfg.optimizer, layout.len());
    let mut best: Option<(f64, FittedGp)> = None;
    let mut last_valid: Option<GpHyperparams> = None;
    let mut initial_grad_norm = 0.0;
    let mut initial_objective = f64::NAN;
    let mut quiet = 0usize;
    let mut epochs_run = 0usize;
    let mut grad = vec![0.0; layout.len()];

    for epoch in 0..epochs {
        let hyper = build_hyper(&mut raw, &layout, cfg.kernel, cfg.lengthscale_mode)?;
        let gp = match FittedGp::with_scaling(hyper.clone(), data.clone(), scaling) {
            Ok(gp) => gp,
            Err(e) => {
                return match last_valid {
                    Some(last) => Err(Error::Training {
                        epoch,
                        last_valid: Box::new(last),
                        source: Box::new(e),
                    }),
                    None => Err(e),
                }
            }
        };
        epochs_run = epoch + 1;
        let lml = gp.log_marginal_likelihood();
        let g = gp.lml_gradient();
        let lp = log_prior(&hyper, &priors, d);
        let objective = -(lml + lp.value);
        if epoch == 0 {
            initial_grad_norm = g.lengthscale_norm();
            initial_objective = objective;
        }
        last_valid = Some(hyper.clone());

        // Chain rule into raw space for the minimized objective.
        for k in 0..layout.n_ls {
            grad[k] = -(g.lengthscales[k] + lp.lengthscales[k]) * softplus_grad(raw[k]);
        }
        grad[layout.amp()] = -(g.amplitude + lp.amplitude) * softplus_grad(raw[layout.amp()]);
        grad[layout.noise()] = -(g.noise_var + lp.noise_var) * softplus_grad(raw[layout.noise()]);

        if objective.is_finite() && best.as_ref().is_none_or(|(b, _)| objective < *b) {
            best = Some((objective, gp));
        }

        if grad.iter().any(|v| !v.is_finite()) {
            break;
        }
        let inf_norm = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        quiet = if inf_norm < EARLY_STOP_TOL {
            quiet + 1
        } else {
            0
        };
        if quiet >= EARLY_STOP_PATIENCE {
            break;
        }
        opt.step(&cfg.optimizer, &mut raw, &grad);
    }

    let (final_objective, gp) = best.ok_or(Error::InvalidArgument(
        "objective was not finite at any epoch".into(),
    ))?;
    let ls_rel_diff = rel_diff(gp.hyper().kernel.lengthscales.values(), &ls_init);
    let report = TrainReport {
        initial_grad_norm,
        ls_rel_diff,
        final_objective,
        initial_objective,
        epochs_run,
        zero_lengthscale_gradient: data.len() == 1,
    };
    Ok((gp, report))
}

/// Log density of `N(mean, var)` at `y`.
pub fn gaussian_log_density(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (y - mean).powi(2) / var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub test_log_lik: f64,
}

/// Test-set MSE and mean predictive log density, both on the model's
/// standardized output scale. The predictive density includes the noise variance.
pub fn evaluate(gp: &FittedGp, test: &Dataset) -> Result<EvalReport> {
    crate::error::check_dim(gp.dim(), test.dim())?;
    let s = gp.scaling();
    let noise = gp.hyper().noise_var;
    let mut se = 0.0;
    let mut ll = 0.0;
    for i in 0..test.len() {
        let p = gp.predict(&test.row(i))?;
        let mu = s.forward(p.mean);
        let var = p.variance / (s.scale * s.scale) + noise;
        let y = s.forward(test.y()[i]);
        se += (mu - y).powi(2);
        ll += gaussian_log_density(y, mu, var);
    }
    let n = test.len() as f64;
    Ok(EvalReport {
        mse: se / n,
        test_log_lik: ll / n,
    })
}

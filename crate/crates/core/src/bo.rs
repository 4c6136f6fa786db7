//! The sequential optimization loop.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize_acquisition, AcqOptConfig, AcquisitionSpec};
use crate::benchmarks::BenchmarkSpec;
use crate::error::{invalid, Error, Result};
use crate::gp::Dataset;
use crate::rng::{self, STREAM_ACQ, STREAM_INIT_DESIGN};
use crate::training::{fit, TrainConfig};

/// A black-box function to maximize over `[0, 1]^d`.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, u: &[f64]) -> Result<f64>;

    /// Coordinates of `u` in the objective's own domain, for reporting.
    fn to_original(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }
}

impl Objective for BenchmarkSpec {
    fn dim(&self) -> usize {
        self.d
    }

    fn evaluate(&self, u: &[f64]) -> Result<f64> {
        BenchmarkSpec::evaluate(self, u)
    }

    fn to_original(&self, u: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.kind.bounds();
        u.iter().map(|v| lo + (hi - lo) * v).collect()
    }
}

/// Wraps a closure on the unit cube as an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, u: &[f64]) -> Result<f64> {
        Ok((self.f)(u))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    pub n_init: usize,
    pub budget: usize,
    pub seed: u64,
    pub training: TrainConfig,
    pub acquisition: AcquisitionSpec,
    /// Starts, iterations and step size for the acquisition maximizer. Its
    /// seed is replaced at each step by one derived from [`BoConfig::seed`].
    pub acq_opt: AcqOptConfig,
}

impl BoConfig {
    pub const DEFAULT_N_INIT: usize = 20;

    pub fn new(
        training: TrainConfig,
        acquisition: AcquisitionSpec,
        budget: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_init: Self::DEFAULT_N_INIT,
            budget,
            seed,
            training,
            acquisition,
            acq_opt: AcqOptConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 {
            return Err(invalid("n_init must be at least 1"));
        }
        if self.budget < self.n_init {
            return Err(invalid(format!(
                "budget ({}) must be at least n_init ({})",
                self.budget, self.n_init
            )));
        }
        self.training.validate()?;
        self.acquisition.validate()?;
        self.acq_opt.validate()
    }
}

/// Training diagnostics of the model fitted before a query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub initial_grad_norm: f64,
    pub ls_rel_diff: f64,
    pub final_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Zero-based index over all queries, initial design included.
    pub step: usize,
    /// Query point in `[0, 1]^d`.
    pub x_unit: Vec<f64>,
    /// Query point in the objective's own domain.
    pub x_query: Vec<f64>,
    pub y: f64,
    pub best_so_far: f64,
    /// `None` for initial-design queries.
    pub diagnostics: Option<StepDiagnostics>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: BoConfig,
    pub records: Vec<StepRecord>,
    /// Set when the run stopped before spending its budget.
    pub error: Option<String>,
}

impl Trajectory {
    pub fn initial_design(&self) -> &[StepRecord] {
        let n = self.config.n_init.min(self.records.len());
        &self.records[..n]
    }

    pub fn bo_steps(&self) -> &[StepRecord] {
        let n = self.config.n_init.min(self.records.len());
        &self.records[n..]
    }

    pub fn best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_so_far)
    }

    pub fn is_complete(&self) -> bool {
        self.error.is_none() && self.records.len() == self.config.budget
    }
}

/// `n_init` seeded uniform points in `[0, 1)^d`, one per row.
pub fn initial_design(d: usize, n_init: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d == 0 || n_init == 0 {
        return Err(invalid("initial design needs d >= 1 and n_init >= 1"));
    }
    let mut r = rng::stream(seed, &[STREAM_INIT_DESIGN]);
    let mut x = DMatrix::<f64>::zeros(n_init, d);
    for i in 0..n_init {
        for j in 0..d {
            x[(i, j)] = r.random::<f64>();
        }
    }
    Ok(x)
}

struct Recorder<'a, O: ?Sized> {
    objective: &'a O,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    records: Vec<StepRecord>,
    best: f64,
}

impl<O: Objective + ?Sized> Recorder<'_, O> {
    fn query(
        &mut self,
        u: Vec<f64>,
        diagnostics: Option<StepDiagnostics>,
        started: Instant,
    ) -> Result<()> {
        let y = self.objective.evaluate(&u)?;
        if !y.is_finite() {
            return Err(Error::Objective(format!(
                "non-finite value {y} at step {}",
                self.records.len()
            )));
        }
        self.best = self.best.max(y);
        self.records.push(StepRecord {
            step: self.records.len(),
            x_query: self.objective.to_original(&u),
            x_unit: u.clone(),
            y,
            best_so_far: self.best,
            diagnostics,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        self.xs.push(u);
        self.ys.push(y);
        Ok(())
    }

    fn dataset(&self) -> Result<Dataset> {
        Dataset::from_rows(&self.xs, &self.ys)
    }
}

fn bo_step<O: Objective + ?Sized>(
    rec: &mut Recorder<'_, O>,
    cfg: &BoConfig,
    step: usize,
) -> Result<()> {
    let started = Instant::now();
    let data = rec.dataset()?;
    let (gp, report) = fit(&data, &cfg.training)?;
    let acq_cfg = AcqOptConfig {
        seed: rng::derive_seed(cfg.seed, &[STREAM_ACQ, step as u64]),
        ..cfg.acq_opt
    };
    let next = maximize_acquisition(&gp, &cfg.acquisition, &acq_cfg)?;
    let diag = StepDiagnostics {
        initial_grad_norm: report.initial_grad_norm,
        ls_rel_diff: report.ls_rel_diff,
        final_objective: report.final_objective,
    };
    rec.query(next.x, Some(diag), started)
}

/// Runs the initial design followed by `budget − n_init` model-guided queries.
/// The model is refitted from the configured initialization at every step.
/// A failure inside the loop ends the run early and is reported in
/// [`Trajectory::error`].
pub fn run_bo<O: Objective + ?Sized>(objective: &O, cfg: &BoConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let d = objective.dim();
    let design = initial_design(d, cfg.n_init, cfg.seed)?;
    let mut rec = Recorder {
        objective,
        xs: Vec::with_capacity(cfg.budget),
        ys: Vec::with_capacity(cfg.budget),
        records: Vec::with_capacity(cfg.budget),
        best: f64::NEG_INFINITY,
    };
    let mut error = None;
    for i in 0..cfg.n_init {
        let u: Vec<f64> = design.row(i).iter().copied().collect();
        if let Err(e) = rec.query(u, None, Instant::now()) {
            error = Some(e.to_string());
            break;
        }
    }
    if error.is_none() {
        for step in cfg.n_init..cfg.budget {
            if let Err(e) = bo_step(&mut rec, cfg, step) {
                error = Some(e.to_string());
                break;
            }
        }
    }
    Ok(Trajectory {
        config: cfg.clone(),
        records: rec.records,
        error,
    })
}

/// Per-step training diagnostics of the model-guided part of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReplaySeries {
    pub steps: Vec<usize>,
    pub grad_norms: Vec<f64>,
    pub ls_rel_diffs: Vec<f64>,
}

pub fn replay_diagnostics(t: &Trajectory) -> ReplaySeries {
    let mut out = ReplaySeries::default();
    for r in t.records.iter() {
        if let Some(d) = r.diagnostics {
            out.steps.push(r.step);
            out.grad_norms.push(d.initial_grad_norm);
            out.ls_rel_diffs.push(d.ls_rel_diff);
        }
    }
    out
}

/// Builds the training set seen at a given step from a trajectory's records.
pub fn dataset_before(t: &Trajectory, step: usize) -> Result<Dataset> {
    let recs = &t.records[..step.min(t.records.len())];
    let d = recs
        .first()
        .map(|r| r.x_unit.len())
        .ok_or_else(|| invalid("no records"))?;
    let x = DMatrix::from_fn(recs.len(), d, |i, j| recs[i].x_unit[j]);
    let y = DVector::from_iterator(recs.len(), recs.iter().map(|r| r.y));
    Dataset::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelKind;
    use crate::training::InitStrategy;

    fn quick_cfg(budget: usize, seed: u64) -> BoConfig {
        let training = TrainConfig::new(KernelKind::Matern52, InitStrategy::RobustSqrtD { c: 1.0 })
            .with_epochs(30);
        let mut cfg = BoConfig::new(training, AcquisitionSpec::default(), budget, seed);
        cfg.n_init = 5;
        cfg.acq_opt.n_starts = 4;
        cfg.acq_opt.n_iters = 20;
        cfg
    }

    #[test]
    fn initial_design_properties() {
        let a = initial_design(4, 20, 1).unwrap();
        assert_eq!(a.nrows(), 20);
        assert!(a.iter().all(|v| (0.0..1.0).contains(v)));
        assert_eq!(a, initial_design(4, 20, 1).unwrap());
        assert_ne!(a, initial_design(4, 20, 2).unwrap());
    }

    #[test]
    fn budget_equal_to_n_init() {
        let f = FnObjective::new(2, |u: &[f64]| u[0] - u[1]);
        let t = run_bo(&f, &quick_cfg(5, 0)).unwrap();
        assert_eq!(t.records.len(), 5);
        assert!(t.bo_steps().is_empty());
        let max = t
            .records
            .iter()
            .map(|r| r.y)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(t.best(), Some(max));
        assert!(replay_diagnostics(&t).grad_norms.is_empty());
    }

    #[test]
    fn constant_objective() {
        let f = FnObjective::new(3, |_: &[f64]| 3.0);
        let t = run_bo(&f, &quick_cfg(9, 4)).unwrap();
        assert!(t.is_complete(), "{:?}", t.error);
        assert!(t.records.iter().all(|r| r.best_so_far == 3.0));
    }

    #[test]
    fn objective_failure_is_flagged() {
        let f = FnObjective::new(1, |u: &[f64]| if u[0] > 0.0 { f64::NAN } else { 0.0 });
        let t = run_bo(&f, &quick_cfg(8, 0)).unwrap();
        assert!(t.error.is_some());
        assert!(t.records.is_empty());
    }

    #[test]
    fn rejects_budget_below_n_init() {
        let f = FnObjective::new(1, |u: &[f64]| u[0]);
        assert!(run_bo(&f, &quick_cfg(3, 0)).is_err());
    }
}

//! Synthetic test functions with low effective dimension.
//!
//! Each raw function is written in its usual minimization form on its native
//! box. [`BenchmarkSpec`] wraps one as a maximization objective on `[0, 1]^d`
//! that reads only the first `d_eff` coordinates.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Value of the one-dimensional shifted Stybtang term at its minimizer.
pub const STYBTANG_MIN_PER_DIM: f64 = -39.166_165_703_771_42;
/// Offset of the per-coordinate Stybtang minimizer from its shift.
pub const STYBTANG_ARGMIN_OFFSET: f64 = -2.903_534_027_771_178;
/// Global minimum of the six-dimensional Hartmann function.
pub const HARTMANN6_MIN: f64 = -3.322_368_011_415_514_7;
/// Standard location of that minimum.
pub const HARTMANN6_ARGMIN: [f64; 6] = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573];

// Hartmann6 constants as tabulated in the standard optimization test-function
// literature (Dixon and Szegő's collection).
const H6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const H6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const H6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// `n` evenly spaced values from `lo` to `hi` inclusive; a single value is `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub fn stybtang_shifts(d: usize) -> Vec<f64> {
    linspace(0.0, 7.5, d)
}

pub fn rosenbrock_shifts(d: usize) -> Vec<f64> {
    linspace(-2.0, 2.0, d)
}

pub fn stybtang(x: &[f64], shifts: &[f64]) -> Result<f64> {
    crate::error::check_dim(shifts.len(), x.len())?;
    Ok(0.5
        * x.iter()
            .zip(shifts)
            .map(|(xi, ci)| {
                let t = xi - ci;
                let t2 = t * t;
                t2 * t2 - 16.0 * t2 + 5.0 * t
            })
            .sum::<f64>())
}

pub fn rosenbrock(x: &[f64], shifts: &[f64]) -> Result<f64> {
    crate::error::check_dim(shifts.len(), x.len())?;
    if x.len() < 2 {
        return Err(invalid("rosenbrock needs at least two dimensions"));
    }
    let t: Vec<f64> = x.iter().zip(shifts).map(|(a, c)| a - c).collect();
    Ok(t.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum())
}

pub fn ackley(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(invalid("ackley needs at least one dimension"));
    }
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    // Grouped so that both brackets vanish exactly at the origin.
    Ok((20.0 - 20.0 * (-0.2 * sq.sqrt()).exp()) + (E - cs.exp()))
}

pub fn hartmann6(x: &[f64]) -> Result<f64> {
    crate::error::check_dim(6, x.len())?;
    let mut total = 0.0;
    for i in 0..4 {
        let inner: f64 = (0..6)
            .map(|j| H6_A[i][j] * (x[j] - H6_P[i][j]).powi(2))
            .sum();
        total -= H6_ALPHA[i] * (-inner).exp();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchmarkKind {
    Stybtang,
    Rosenbrock,
    Ackley,
    Hartmann6,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 4] = [
        BenchmarkKind::Stybtang,
        BenchmarkKind::Rosenbrock,
        BenchmarkKind::Ackley,
        BenchmarkKind::Hartmann6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Stybtang => "Stybtang",
            BenchmarkKind::Rosenbrock => "Rosenbrock",
            BenchmarkKind::Ackley => "Ackley",
            BenchmarkKind::Hartmann6 => "Hartmann6",
        }
    }

    /// Native box, identical for every coordinate.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            BenchmarkKind::Stybtang => (-5.0, 5.0),
            BenchmarkKind::Rosenbrock => (-2.048, 2.048),
            BenchmarkKind::Ackley => (-32.768, 32.768),
            BenchmarkKind::Hartmann6 => (0.0, 1.0),
        }
    }

    pub fn known_names() -> String {
        Self::ALL.map(|k| k.name()).join(", ")
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(name.trim()))
    }
}

/// A benchmark instance: ambient dimension `d`, of which the first `d_eff`
/// coordinates are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    pub d: usize,
    pub d_eff: usize,
    shifts: Vec<f64>,
}

impl BenchmarkSpec {
    pub fn new(kind: BenchmarkKind, d: usize, d_eff: usize) -> Result<Self> {
        if d_eff == 0 || d_eff > d {
            return Err(invalid(format!(
                "need 1 <= d_eff <= d, got d={d}, d_eff={d_eff}"
            )));
        }
        match kind {
            BenchmarkKind::Hartmann6 if d_eff != 6 => {
                return Err(invalid("Hartmann6 has exactly 6 effective dimensions"))
            }
            BenchmarkKind::Rosenbrock if d_eff < 2 => {
                return Err(invalid(
                    "Rosenbrock needs at least two effective dimensions",
                ))
            }
            _ => {}
        }
        let shifts = match kind {
            BenchmarkKind::Stybtang => stybtang_shifts(d_eff),
            BenchmarkKind::Rosenbrock => rosenbrock_shifts(d_eff),
            _ => Vec::new(),
        };
        Ok(Self {
            kind,
            d,
            d_eff,
            shifts,
        })
    }

    pub fn name(&self) -> String {
        format!("{}({},{})", self.kind.name(), self.d, self.d_eff)
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    /// Raw (minimization-form) value at a point of the native box, given the
    /// `d_eff` effective coordinates.
    pub fn raw(&self, x_eff: &[f64]) -> Result<f64> {
        crate::error::check_dim(self.d_eff, x_eff.len())?;
        match self.kind {
            BenchmarkKind::Stybtang => stybtang(x_eff, &self.shifts),
            BenchmarkKind::Rosenbrock => rosenbrock(x_eff, &self.shifts),
            BenchmarkKind::Ackley => ackley(x_eff),
            BenchmarkKind::Hartmann6 => hartmann6(x_eff),
        }
    }

    /// Maps the effective part of a unit-cube point to the native box.
    pub fn to_native(&self, u: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_dim(self.d, u.len())?;
        let (lo, hi) = self.kind.bounds();
        Ok(u[..self.d_eff].iter().map(|v| lo + (hi - lo) * v).collect())
    }

    /// Inverse of [`Self::to_native`] for the effective coordinates; the
    /// remaining coordinates are filled with `fill`.
    pub fn to_unit(&self, x_eff: &[f64], fill: f64) -> Result<Vec<f64>> {
        crate::error::check_dim(self.d_eff, x_eff.len())?;
        let (lo, hi) = self.kind.bounds();
        let mut u = vec![fill; self.d];
        for (o, v) in u.iter_mut().zip(x_eff) {
            *o = (v - lo) / (hi - lo);
        }
        Ok(u)
    }

    /// Maximization objective on `[0, 1]^d`.
    pub fn evaluate(&self, u: &[f64]) -> Result<f64> {
        if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("benchmark input must lie in [0, 1]^d"));
        }
        Ok(-self.raw(&self.to_native(u)?)?)
    }

    /// The maximum of [`Self::evaluate`] when it is attained inside the box.
    pub fn optimum(&self) -> Option<f64> {
        match self.kind {
            BenchmarkKind::Ackley => Some(0.0),
            BenchmarkKind::Hartmann6 => Some(-HARTMANN6_MIN),
            BenchmarkKind::Stybtang => Some(-STYBTANG_MIN_PER_DIM * self.d_eff as f64),
            // The shifted minimizer leaves the box for the larger shifts.
            BenchmarkKind::Rosenbrock => None,
        }
    }
}

impl std::str::FromStr for BenchmarkSpec {
    type Err = Error;

    /// Parses `Name(d,d_eff)` or `Name(d)`.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownBenchmark {
            name: s.to_string(),
            known: BenchmarkKind::known_names(),
        };
        let s_trim = s.trim();
        let (name, args) = match s_trim.split_once('(') {
            Some((n, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| invalid(format!("bad benchmark `{s}`: missing `)`")))?;
                (n, Some(inner))
            }
            None => (s_trim, None),
        };
        let kind = BenchmarkKind::from_name(name).ok_or_else(unknown)?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| invalid(format!("bad benchmark dimension `{v}` in `{s}`")))
        };
        let (d, d_eff) = match args {
            None if kind == BenchmarkKind::Hartmann6 => (6, 6),
            None => {
                return Err(invalid(format!(
                    "benchmark `{s}` needs dimensions, e.g. {name}(100,10)"
                )))
            }
            Some(inner) => match inner.split_once(',') {
                Some((a, b)) => (parse(a)?, parse(b)?),
                None => {
                    let d = parse(inner)?;
                    (
                        d,
                        if kind == BenchmarkKind::Hartmann6 {
                            6
                        } else {
                            d
                        },
                    )
                }
            },
        };
        BenchmarkSpec::new(kind, d, d_eff)
    }
}

impl std::fmt::Display for BenchmarkSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

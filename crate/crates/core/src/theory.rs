//! Closed-form thresholds and tail bounds for length-scale gradient vanishing.
//!
//! A pair of training inputs contributes nothing to the length-scale gradient
//! in floating point once its scaled distance `ρ` passes a kernel-specific
//! threshold `τ`. For inputs drawn uniformly from the unit cube, the Hoeffding
//! inequality bounds how likely a pair is to land past the threshold.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gp::KernelKind;
use crate::rng::{self, STREAM_MONTE_CARLO};

/// Unit roundoff of IEEE double precision, `2⁻⁵³`.
pub const MACHINE_EPSILON: f64 = 1.0 / 9_007_199_254_740_992.0;

/// Targets and dimensions of the minimal-dimension table, for `ℓ₀ = 0.5`.
pub const MIN_DIM_TARGETS: [f64; 6] = [0.95, 0.99, 0.995, 0.999, 0.9995, 0.9999];

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi < (-1.0f64).exp() {
        Ok(())
    } else {
        Err(invalid(format!("xi must lie in (0, 1/e), got {xi}")))
    }
}

/// Scaled distance beyond which a pair's gradient contribution falls below `xi`.
pub fn tau_threshold(kind: KernelKind, xi: f64) -> Result<f64> {
    check_xi(xi)?;
    Ok(match kind {
        KernelKind::SquaredExponential => 0.5 + (0.25 - xi.ln()).sqrt(),
        KernelKind::Matern52 => {
            let s = 1.0 + (1.0 + (0.2f64).ln() - xi.ln()).sqrt();
            s * s / 5.0f64.sqrt()
        }
    })
}

/// The gradient factor a pair at scaled distance `rho` contributes:
/// `ρ²e^{−ρ²}` for the squared exponential, `ρ²e^{−√5ρ}` for Matérn-5/2.
pub fn vanishing_factor(kind: KernelKind, rho: f64) -> f64 {
    match kind {
        KernelKind::SquaredExponential => rho * rho * (-rho * rho).exp(),
        KernelKind::Matern52 => rho * rho * (-(5.0f64.sqrt()) * rho).exp(),
    }
}

/// Whether the factor at `rho` is below `xi`.
pub fn sufficiency_check(kind: KernelKind, xi: f64, rho: f64) -> bool {
    vanishing_factor(kind, rho) < xi
}

/// Result of the lower-bound formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LowerBound {
    /// `d ≤ 6ℓ₀²τ²`, where the bound says nothing.
    NotApplicable,
    /// `clamped` lies in `[0, 1)`; `raw` is the formula before clamping.
    Value { clamped: f64, raw: f64 },
}

impl LowerBound {
    pub fn value(self) -> Option<f64> {
        match self {
            LowerBound::NotApplicable => None,
            LowerBound::Value { clamped, .. } => Some(clamped),
        }
    }
}

/// Lower bound on `P(ρ ≥ τ)` for a pair of uniform inputs at fixed
/// length-scale `ℓ₀`: `1 − 2exp(−(d − 6ℓ₀²τ²)²/(18d))`.
pub fn vanish_prob_lower_bound(d: usize, l0: f64, tau: f64) -> LowerBound {
    let d = d as f64;
    let m = 6.0 * l0 * l0 * tau * tau;
    if !(d > m) {
        return LowerBound::NotApplicable;
    }
    let raw = 1.0 - 2.0 * (-(d - m).powi(2) / (18.0 * d)).exp();
    LowerBound::Value {
        clamped: raw.clamp(0.0, 1.0 - f64::EPSILON / 2.0),
        raw,
    }
}

/// Raw value of the upper-bound formula `2exp(−2(c²τ² − 1/6)²d)`.
pub fn vanish_prob_upper_bound_raw(d: usize, c: f64, tau: f64) -> Result<f64> {
    if !(c > 1.0 / (6.0f64.sqrt() * tau)) || !(tau > 0.0) {
        return Err(invalid(format!(
            "upper bound requires c > 1/(sqrt(6) tau); got c={c}, tau={tau}"
        )));
    }
    Ok(2.0 * (-2.0 * (c * c * tau * tau - 1.0 / 6.0).powi(2) * d as f64).exp())
}

/// Upper bound on `P(ρ ≥ τ)` under the length-scale `ℓ₀ = c√d`, clamped to `[0, 1]`.
pub fn vanish_prob_upper_bound(d: usize, c: f64, tau: f64) -> Result<f64> {
    Ok(vanish_prob_upper_bound_raw(d, c, tau)?.clamp(0.0, 1.0))
}

/// Smallest `d` whose lower bound reaches `target`.
pub fn min_dim_for_bound(l0: f64, tau: f64, target: f64) -> Result<usize> {
    if !(target > 0.0 && target < 1.0) {
        return Err(invalid(format!("target must lie in (0, 1), got {target}")));
    }
    let reaches = |d: usize| {
        vanish_prob_lower_bound(d, l0, tau)
            .value()
            .is_some_and(|v| v >= target)
    };
    let mut lo = (6.0 * l0 * l0 * tau * tau).floor() as usize;
    let mut hi = lo.max(1);
    while !reaches(hi) {
        lo = hi;
        hi *= 2;
    }
    // Invariant: !reaches(lo) (or lo at the boundary), reaches(hi).
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Monte-Carlo estimate of `P(‖x − x'‖/ℓ₀ ≥ τ)` for independent uniform pairs,
/// with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

pub fn monte_carlo_rho_tail(
    d: usize,
    l0: f64,
    tau: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < 1000 {
        return Err(invalid(
            "Monte-Carlo estimation needs at least 1000 samples",
        ));
    }
    if d == 0 || !(l0 > 0.0) {
        return Err(invalid("need d >= 1 and a positive length-scale"));
    }
    let mut r = rng::stream(seed, &[STREAM_MONTE_CARLO]);
    let cut = (tau * l0).powi(2);
    let mut hits = 0usize;
    for _ in 0..n_samples {
        let mut s = 0.0;
        for _ in 0..d {
            let diff = r.random::<f64>() - r.random::<f64>();
            s += diff * diff;
        }
        if s >= cut {
            hits += 1;
        }
    }
    let n = n_samples as f64;
    let p = hits as f64 / n;
    Ok(McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / n).sqrt(),
        n_samples,
    })
}

/// Length-scale parameterization for a report row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LengthScaleSetting {
    /// Fixed `ℓ₀`.
    Fixed(f64),
    /// `ℓ₀ = c√d`.
    Robust(f64),
}

impl LengthScaleSetting {
    pub fn at_dim(self, d: usize) -> f64 {
        match self {
            LengthScaleSetting::Fixed(l) => l,
            LengthScaleSetting::Robust(c) => c * (d as f64).sqrt(),
        }
    }

    pub fn parameter(self) -> f64 {
        match self {
            LengthScaleSetting::Fixed(v) | LengthScaleSetting::Robust(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub kernel: KernelKind,
    pub xi: f64,
    pub setting: LengthScaleSetting,
    pub tau: f64,
    pub d: usize,
    /// `None` when the lower bound is not applicable (or under robust init).
    pub lower_bound: Option<f64>,
    /// `None` outside the robust-init regime or when its precondition fails.
    pub upper_bound: Option<f64>,
    pub mc: Option<McEstimate>,
}

/// One report row; `mc_samples = 0` skips simulation.
pub fn bound_row(
    kernel: KernelKind,
    xi: f64,
    tau_override: Option<f64>,
    setting: LengthScaleSetting,
    d: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<BoundRow> {
    let tau = match tau_override {
        Some(t) => t,
        None => tau_threshold(kernel, xi)?,
    };
    let (lower_bound, upper_bound) = match setting {
        LengthScaleSetting::Fixed(l0) => (vanish_prob_lower_bound(d, l0, tau).value(), None),
        LengthScaleSetting::Robust(c) => (None, vanish_prob_upper_bound(d, c, tau).ok()),
    };
    let mc = if mc_samples > 0 {
        let row_seed = rng::derive_seed(
            seed,
            &[d as u64, setting.parameter().to_bits(), tau.to_bits()],
        );
        Some(monte_carlo_rho_tail(
            d,
            setting.at_dim(d),
            tau,
            mc_samples,
            row_seed,
        )?)
    } else {
        None
    };
    Ok(BoundRow {
        kernel,
        xi,
        setting,
        tau,
        d,
        lower_bound,
        upper_bound,
        mc,
    })
}

/// One row of the minimal-dimension table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinDimRow {
    pub kernel: KernelKind,
    pub target: f64,
    pub min_dim: usize,
}

/// Minimal dimensions for every target in [`MIN_DIM_TARGETS`] at the given
/// `ℓ₀`, for both kernels at machine epsilon.
pub fn min_dim_table(l0: f64) -> Result<Vec<MinDimRow>> {
    min_dim_table_for(MACHINE_EPSILON, l0, &MIN_DIM_TARGETS, None)
}

/// [`min_dim_table`] with a chosen `ξ`, target list and optional `τ` used
/// for both kernels in place of the computed thresholds.
pub fn min_dim_table_for(
    xi: f64,
    l0: f64,
    targets: &[f64],
    tau_override: Option<f64>,
) -> Result<Vec<MinDimRow>> {
    if !(l0 > 0.0 && l0.is_finite()) {
        return Err(invalid(format!("l0 must be positive, got {l0}")));
    }
    let mut rows = Vec::new();
    for kernel in [KernelKind::SquaredExponential, KernelKind::Matern52] {
        let tau = match tau_override {
            Some(t) => t,
            None => tau_threshold(kernel, xi)?,
        };
        for &target in targets {
            rows.push(MinDimRow {
                kernel,
                target,
                min_dim: min_dim_for_bound(l0, tau, target)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_values() {
        let se = tau_threshold(KernelKind::SquaredExponential, MACHINE_EPSILON).unwrap();
        let mat = tau_threshold(KernelKind::Matern52, MACHINE_EPSILON).unwrap();
        assert!((se - 6.58).abs() < 0.01, "{se}");
        assert!((mat - 21.98).abs() < 0.01, "{mat}");
        let edge = tau_threshold(
            KernelKind::SquaredExponential,
            (-1.0f64).exp() * (1.0 - 1e-15),
        )
        .unwrap();
        assert!((edge - (0.5 + 1.25f64.sqrt())).abs() < 1e-6);
        assert!(tau_threshold(KernelKind::SquaredExponential, 0.5).is_err());
        assert!(tau_threshold(KernelKind::Matern52, 0.0).is_err());
    }

    #[test]
    fn sufficiency_examples() {
        let se = tau_threshold(KernelKind::SquaredExponential, MACHINE_EPSILON).unwrap();
        assert!(sufficiency_check(
            KernelKind::SquaredExponential,
            MACHINE_EPSILON,
            se
        ));
        assert!(!sufficiency_check(
            KernelKind::SquaredExponential,
            MACHINE_EPSILON,
            1.0
        ));
        assert!(sufficiency_check(KernelKind::Matern52, 1e-10, 0.0));
    }

    #[test]
    fn lower_bound_examples() {
        assert!(vanish_prob_lower_bound(205, 0.5, 6.58).value().unwrap() > 0.99);
        let v = vanish_prob_lower_bound(172, 0.5, 6.58).value().unwrap();
        assert!((v - 0.9507).abs() < 5e-4, "{v}");
        let m: f64 = 6.0 * 0.25 * 6.58 * 6.58;
        assert_eq!(
            vanish_prob_lower_bound(m.ceil() as usize, 0.5, 6.58).value(),
            Some(0.0)
        );
        assert_eq!(
            vanish_prob_lower_bound(m.floor() as usize, 0.5, 6.58),
            LowerBound::NotApplicable
        );
    }

    #[test]
    fn upper_bound_examples() {
        let v = vanish_prob_upper_bound(10, 1.0, 1.0).unwrap();
        let want = 2.0 * (-2.0 * (5.0f64 / 6.0).powi(2) * 10.0).exp();
        assert!((v - want).abs() < 1e-20 && (v - 1.86e-6).abs() < 1e-8);
        assert!(vanish_prob_upper_bound(20, 1.0, 1.0).unwrap() < v);
        assert!(vanish_prob_upper_bound(100, 1.0, 6.58).unwrap() < 1e-300);
        assert!(vanish_prob_upper_bound(10, 0.1, 1.0).is_err());
    }

    #[test]
    fn tau_zero_tail_is_certain() {
        let mc = monte_carlo_rho_tail(5, 0.5, 0.0, 1000, 3).unwrap();
        assert_eq!(mc.estimate, 1.0);
        assert!(monte_carlo_rho_tail(5, 0.5, 1.0, 999, 3).is_err());
    }
}

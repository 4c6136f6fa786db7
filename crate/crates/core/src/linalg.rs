use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative jitter levels tried in order; each is multiplied by the caller's scale.
pub(crate) const JITTER_LEVELS: [f64; 6] = [0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2];

/// Factorizes `m`, escalating diagonal jitter (relative to `scale`) on failure.
/// Returns the factor together with the absolute jitter that was added.
pub(crate) fn cholesky_with_jitter(
    m: &DMatrix<f64>,
    scale: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    for rel in JITTER_LEVELS {
        let jitter = rel * scale;
        let mut trial = m.clone();
        if jitter > 0.0 {
            for i in 0..trial.nrows() {
                trial[(i, i)] += jitter;
            }
        }
        if let Some(ch) = Cholesky::new(trial) {
            if ch
                .l_dirty()
                .diagonal()
                .iter()
                .all(|v| v.is_finite() && *v > 0.0)
            {
                return Ok((ch, jitter));
            }
        }
    }
    Err(Error::Factorization {
        max_jitter: JITTER_LEVELS[JITTER_LEVELS.len() - 1] * scale,
    })
}

/// Inverse of a lower-triangular matrix, exploiting the triangular structure of
/// the result (about n³/6 multiply-adds).
pub(crate) fn lower_triangular_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        col[j..].iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0;
        for k in j..n {
            let xk = col[k] / l[(k, k)];
            col[k] = xk;
            if xk != 0.0 {
                let lcol = &l.as_slice()[k * n + k + 1..(k + 1) * n];
                for (c, lv) in col[k + 1..].iter_mut().zip(lcol) {
                    *c -= xk * lv;
                }
            }
        }
        inv.as_mut_slice()[j * n + j..(j + 1) * n].copy_from_slice(&col[j..]);
    }
    inv
}

/// `(L Lᵀ)⁻¹` from the lower factor `L`.
pub(crate) fn cholesky_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let linv = lower_triangular_inverse(l);
    let mut out = linv.transpose() * &linv;
    symmetrize(&mut out);
    out
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Columns of `x` shifted by `center` and multiplied by `scale`.
fn scaled_centered(x: &DMatrix<f64>, center: &[f64], scale: &[f64]) -> DMatrix<f64> {
    let mut z = x.clone();
    for (k, mut col) in z.column_iter_mut().enumerate() {
        let (c, s) = (center[k], scale[k]);
        col.iter_mut().for_each(|v| *v = (*v - c) * s);
    }
    z
}

pub(crate) fn column_means(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows().max(1) as f64;
    x.column_iter().map(|c| c.sum() / n).collect()
}

/// Weighted squared distances `Σ_k w_k (x_ik − x_jk)²` between all rows of `x`.
/// The result is exactly symmetric with an exactly zero diagonal.
pub(crate) fn sq_dist_matrix(x: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let n = x.nrows();
    let scale: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let z = scaled_centered(x, &column_means(x), &scale);
    let norms: Vec<f64> = z.row_iter().map(|r| r.norm_squared()).collect();
    let gram = &z * z.transpose();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in j + 1..n {
            let v = (norms[i] + norms[j] - 2.0 * gram[(i, j)]).max(0.0);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Weighted squared distances between rows of `a` (M×d) and rows of `b` (N×d); M×N.
pub(crate) fn cross_sq_dist(a: &DMatrix<f64>, b: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let scale: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let center = column_means(b);
    let za = scaled_centered(a, &center, &scale);
    let zb = scaled_centered(b, &center, &scale);
    let na: Vec<f64> = za.row_iter().map(|r| r.norm_squared()).collect();
    let nb: Vec<f64> = zb.row_iter().map(|r| r.norm_squared()).collect();
    let mut g = &za * zb.transpose();
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            g[(i, j)] = (na[i] + nb[j] - 2.0 * g[(i, j)]).max(0.0);
        }
    }
    g
}

pub(crate) fn weighted_sq_dist(x: &[f64], y: &[f64], weights: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(weights)
        .map(|((a, b), w)| {
            let d = a - b;
            w * d * d
        })
        .sum()
}

pub(crate) fn row_vec(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

pub(crate) fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    l.solve_lower_triangular(b)
        .expect("cholesky factor has a positive diagonal")
}

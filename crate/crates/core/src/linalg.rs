//! Small dense linear-algebra and statistics helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Median; an even count averages the two middle values.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Linear-interpolated quantile, `q` in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Thin SVD `A = U·diag(s)·Vᵀ` with singular values in decreasing order.
/// `u` is `m × k` and `v_t` is `k × n` for `k = min(m, n)`; columns of `u`
/// belonging to zero singular values are zero.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

impl Svd {
    /// Sum of the leading `rank` rank-one terms.
    pub fn truncated(&self, rank: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.u.nrows(), self.v_t.ncols());
        for k in 0..rank.min(self.singular_values.len()) {
            out += self.singular_values[k] * self.u.column(k) * self.v_t.row(k);
        }
        out
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &DMatrix<f64>) -> Svd {
    if a.nrows() < a.ncols() {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v_t.transpose(),
            singular_values: t.singular_values,
            v_t: t.u.transpose(),
        };
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|x, y| norms[*y].total_cmp(&norms[*x]).then(x.cmp(y)));
    let mut u = DMatrix::zeros(m, n);
    let mut v_t = DMatrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        if norms[j] > 0.0 {
            u.set_column(k, &(w.column(j) / norms[j]));
        }
        v_t.set_row(k, &v.column(j).transpose());
    }
    Svd {
        u,
        singular_values: order.iter().map(|j| norms[*j]).collect(),
        v_t,
    }
}

/// Minimum-norm least-squares solution via SVD.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, target has {}",
            a.nrows(),
            b.len()
        )));
    }
    if a.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let svd = svd(a);
    let eps = svd.singular_values[0] * 1e-12 * a.nrows().max(a.ncols()) as f64;
    let mut x = DVector::zeros(a.ncols());
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > eps {
            let coef = svd.u.column(k).dot(b) / s;
            x += coef * svd.v_t.row(k).transpose();
        }
    }
    Ok(x)
}

/// Solves `(AᵀA + λI) x = Aᵀb`; falls back to the pseudo-inverse if the
/// Cholesky factorization fails.
pub fn ridge_solve(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let mut gram = a.transpose() * a;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = a.transpose() * b;
    match gram.clone().cholesky() {
        Some(c) => Ok(c.solve(&rhs)),
        None => lstsq(&gram, &rhs),
    }
}

/// Solves ordinary least squares, retrying with a tiny ridge term when the
/// normal equations are singular.
pub fn ols_with_ridge_fallback(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let gram = a.transpose() * a;
    let rhs = a.transpose() * b;
    if let Some(c) = gram.clone().cholesky() {
        let x = c.solve(&rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    ridge_solve(a, b, 1e-10)
}

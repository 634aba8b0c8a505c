//! Low-rank completion of partially observed matrices: soft-thresholded SVD
//! for meter × month matrices and alternating least squares for small
//! temperature tables.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::rng;

/// Rows of optional entries.
pub type PartialMatrix = Vec<Vec<Option<f64>>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionConfig {
    pub max_rank: usize,
    /// Soft threshold subtracted from every singular value.
    pub shrinkage: f64,
    pub max_iters: usize,
    /// Stop when ‖Zₜ − Zₜ₋₁‖²_F / ‖Zₜ₋₁‖²_F falls below this.
    pub tolerance: f64,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            max_rank: 3,
            shrinkage: 0.0,
            max_iters: 500,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub matrix: DMatrix<f64>,
    pub iterations: usize,
    /// ½‖P_Ω(X − Z)‖² + shrinkage·‖Z‖_* after each iteration.
    pub objective_trace: Vec<f64>,
}

fn shape(m: &PartialMatrix) -> Result<(usize, usize)> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::InsufficientData("empty matrix".into()));
    }
    if m.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok((rows, cols))
}

/// Soft-impute: repeatedly replace missing entries with the soft-thresholded,
/// rank-truncated SVD reconstruction. Observed entries are returned unchanged.
pub fn complete_monthly_matrix(m: &PartialMatrix, config: &CompletionConfig) -> Result<Completion> {
    let (rows, cols) = shape(m)?;
    if config.max_rank == 0 || config.max_rank > rows.min(cols) {
        return Err(Error::InvalidParameter(format!(
            "max_rank {} must be in 1..={}",
            config.max_rank,
            rows.min(cols)
        )));
    }
    if !(config.shrinkage >= 0.0) {
        return Err(Error::InvalidParameter("shrinkage must be non-negative".into()));
    }
    if let Some(i) = m.iter().position(|r| r.iter().all(Option::is_none)) {
        return Err(Error::InsufficientData(format!("row {i} has no observed entries")));
    }

    let mut col_means = vec![0.0; cols];
    for (j, mean) in col_means.iter_mut().enumerate() {
        let obs: Vec<f64> = m.iter().filter_map(|r| r[j]).collect();
        *mean = if obs.is_empty() {
            m.iter().flatten().flatten().sum::<f64>() / m.iter().flatten().flatten().count() as f64
        } else {
            obs.iter().sum::<f64>() / obs.len() as f64
        };
    }
    let mut z = DMatrix::from_fn(rows, cols, |i, j| m[i][j].unwrap_or(col_means[j]));
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..config.max_iters {
        iterations += 1;
        let filled = DMatrix::from_fn(rows, cols, |i, j| m[i][j].unwrap_or(z[(i, j)]));
        let svd = svd(&filled);
        let (u, vt) = (&svd.u, &svd.v_t);
        let mut next = DMatrix::zeros(rows, cols);
        let mut nuclear = 0.0;
        for k in 0..config.max_rank.min(svd.singular_values.len()) {
            let s = (svd.singular_values[k] - config.shrinkage).max(0.0);
            if s == 0.0 {
                continue;
            }
            nuclear += s;
            next += s * u.column(k) * vt.row(k);
        }
        let mut resid = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                if let Some(x) = m[i][j] {
                    resid += (x - next[(i, j)]).powi(2);
                }
            }
        }
        trace.push(0.5 * resid + config.shrinkage * nuclear);
        let denom = z.norm_squared().max(f64::MIN_POSITIVE);
        let change = (&next - &z).norm_squared() / denom;
        z = next;
        if change < config.tolerance {
            break;
        }
    }
    let matrix = DMatrix::from_fn(rows, cols, |i, j| m[i][j].unwrap_or(z[(i, j)]));
    Ok(Completion {
        matrix,
        iterations,
        objective_trace: trace,
    })
}

/// Rank-`rank` alternating-least-squares factorization fit to the observed
/// entries; returns the input with missing entries replaced.
pub fn cf_fill(m: &PartialMatrix, rank: usize, iters: usize, seed: u64) -> Result<DMatrix<f64>> {
    let (rows, cols) = shape(m)?;
    if rank == 0 || rank > rows.min(cols) {
        return Err(Error::InvalidParameter(format!(
            "rank {rank} must be in 1..={}",
            rows.min(cols)
        )));
    }
    const LAMBDA: f64 = 1e-8;
    let mut rng = rng::stream(seed, "cf_fill");
    let scale = {
        let obs: Vec<f64> = m.iter().flatten().flatten().copied().collect();
        (obs.iter().map(|x| x * x).sum::<f64>() / obs.len().max(1) as f64).sqrt().max(1e-6)
    };
    let init = (scale / rank as f64).sqrt();
    let mut u = DMatrix::from_fn(rows, rank, |_, _| init * rng.gen_range(0.5..1.5));
    let mut v = DMatrix::from_fn(cols, rank, |_, _| init * rng.gen_range(0.5..1.5));

    let solve_side = |fixed: &DMatrix<f64>, entries: &[(usize, f64)]| -> DVector<f64> {
        let mut gram = DMatrix::<f64>::identity(rank, rank) * LAMBDA;
        let mut rhs = DVector::<f64>::zeros(rank);
        for (idx, x) in entries {
            let f = fixed.row(*idx).transpose();
            gram += &f * f.transpose();
            rhs += f * *x;
        }
        gram.cholesky().map(|c| c.solve(&rhs)).unwrap_or_else(|| DVector::zeros(rank))
    };
    for _ in 0..iters {
        for i in 0..rows {
            let entries: Vec<(usize, f64)> = (0..cols).filter_map(|j| m[i][j].map(|x| (j, x))).collect();
            let sol = solve_side(&v, &entries);
            u.set_row(i, &sol.transpose());
        }
        for j in 0..cols {
            let entries: Vec<(usize, f64)> = (0..rows).filter_map(|i| m[i][j].map(|x| (i, x))).collect();
            let sol = solve_side(&u, &entries);
            v.set_row(j, &sol.transpose());
        }
    }
    let recon = &u * v.transpose();
    Ok(DMatrix::from_fn(rows, cols, |i, j| m[i][j].unwrap_or(recon[(i, j)])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rank_one(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..rows).map(|_| rng.gen_range(1.0..5.0)).collect();
        let v: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.5..2.0)).collect();
        DMatrix::from_fn(rows, cols, |i, j| u[i] * v[j])
    }

    fn mask(full: &DMatrix<f64>, frac: f64, seed: u64) -> PartialMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..full.nrows())
            .map(|i| {
                let mut row: Vec<Option<f64>> = (0..full.ncols())
                    .map(|j| (!rng.gen_bool(frac)).then_some(full[(i, j)]))
                    .collect();
                if row.iter().all(Option::is_none) {
                    row[0] = Some(full[(i, 0)]);
                }
                row
            })
            .collect()
    }

    #[test]
    fn complete_matrix_is_fixed_point() {
        let full = rank_one(6, 12, 1);
        let m: PartialMatrix = (0..6).map(|i| (0..12).map(|j| Some(full[(i, j)])).collect()).collect();
        let out = complete_monthly_matrix(&m, &CompletionConfig::default()).unwrap();
        assert_eq!(out.matrix, full);
    }

    #[test]
    fn recovers_masked_rank_one() {
        let full = rank_one(40, 12, 2);
        let m = mask(&full, 0.3, 3);
        let config = CompletionConfig {
            max_rank: 1,
            shrinkage: 0.0,
            max_iters: 20_000,
            tolerance: 1e-30,
        };
        let out = complete_monthly_matrix(&m, &config).unwrap();
        let err = (&out.matrix - &full).abs().max();
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn constant_matrix_single_hole() {
        let mut m: PartialMatrix = vec![vec![Some(7.0); 12]; 5];
        m[2][4] = None;
        let out = complete_monthly_matrix(&m, &CompletionConfig::default()).unwrap();
        assert!((out.matrix[(2, 4)] - 7.0).abs() < 1e-9);
    }

    #[test]
    fn objective_is_non_increasing() {
        let mut full = rank_one(20, 12, 5);
        full[(0, 0)] += 3.0;
        full[(7, 3)] -= 1.0;
        let m = mask(&full, 0.25, 6);
        let config = CompletionConfig {
            max_rank: 12,
            shrinkage: 0.5,
            max_iters: 200,
            tolerance: 1e-14,
        };
        let out = complete_monthly_matrix(&m, &config).unwrap();
        for w in out.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{w:?}");
        }
    }

    #[test]
    fn completion_errors() {
        let m: PartialMatrix = vec![vec![None; 12], vec![Some(1.0); 12]];
        assert!(complete_monthly_matrix(&m, &CompletionConfig { max_rank: 1, ..Default::default() }).is_err());
        let m: PartialMatrix = vec![vec![Some(1.0); 12]; 2];
        assert!(complete_monthly_matrix(&m, &CompletionConfig { max_rank: 3, ..Default::default() }).is_err());
    }

    #[test]
    fn cf_complete_input_unchanged() {
        let full = rank_one(10, 3, 8);
        let m: PartialMatrix = (0..10).map(|i| (0..3).map(|j| Some(full[(i, j)])).collect()).collect();
        assert_eq!(cf_fill(&m, 1, 50, 1).unwrap(), full);
    }

    #[test]
    fn cf_recovers_rank_one() {
        let full = rank_one(60, 3, 9);
        let m = mask(&full, 0.2, 10);
        let out = cf_fill(&m, 1, 500, 4).unwrap();
        let err = (&out - &full).abs().max();
        assert!(err < 1e-4, "max error {err}");
    }

    #[test]
    fn cf_rank_too_large() {
        let m: PartialMatrix = vec![vec![Some(1.0); 3]; 10];
        assert!(cf_fill(&m, 4, 10, 1).is_err());
    }
}

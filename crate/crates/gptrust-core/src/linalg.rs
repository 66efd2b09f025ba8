//! Dense solves for symmetric positive-definite systems.
//!
//! Everything downstream (conditioning, predictive variances, marginal
//! likelihoods) funnels through one Cholesky factorization per model, held
//! in a [`CholFactor`]. Factorization retries with escalating diagonal
//! jitter so that merely semi-definite matrices (duplicate inputs, zero
//! noise) still factor; the jitter actually applied is recorded on the
//! factor so callers can account for it.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

/// Default relative jitter base: escalates by decades up to `1e6` times
/// this, i.e. from `1e-9` to `1e-3` of the largest diagonal entry.
pub const DEFAULT_BASE_JITTER: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |A - A'| reaches {max_asym:e} (tolerance {tol:e})")]
    NotSymmetric { max_asym: f64, tol: f64 },
    #[error("Cholesky factorization failed at every jitter level {attempted:?}")]
    FactorizationFailed { attempted: Vec<f64> },
    #[error("dimension mismatch: factor is {factor}, operand is {operand}")]
    DimensionMismatch { factor: usize, operand: usize },
}

/// A lower-triangular Cholesky factor of `A + jitter_used * I`.
#[derive(Debug, Clone)]
pub struct CholFactor {
    lower: DMatrix<f64>,
    jitter_used: f64,
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Diagonal jitter that had to be added before factorization succeeded;
    /// zero for well-conditioned inputs.
    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// Factor of an empty (0x0) system; solves against it are no-ops.
    pub(crate) fn empty() -> Self {
        CholFactor {
            lower: DMatrix::zeros(0, 0),
            jitter_used: 0.0,
        }
    }
}

/// Factors `A + jI` for the smallest working `j` from the ladder
/// `{0, b, 10b, ..., 1e6 b}` with `b = base_jitter * max(diag(A))`.
///
/// The input must be square and symmetric to `1e-10` relative tolerance.
/// The factorization is deterministic: identical inputs yield bitwise
/// identical factors.
pub fn chol_jittered(a: &DMatrix<f64>, base_jitter: f64) -> Result<CholFactor, LinalgError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: n,
            cols: a.ncols(),
        });
    }
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale;
    let mut max_asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if max_asym > tol {
        return Err(LinalgError::NotSymmetric { max_asym, tol });
    }

    let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(a[(i, i)]));
    let base = if max_diag > 0.0 { base_jitter * max_diag } else { base_jitter };
    let mut ladder = vec![0.0];
    if base > 0.0 {
        ladder.extend((0..=6).map(|k| base * 10f64.powi(k)));
    }

    let mut attempted = Vec::with_capacity(ladder.len());
    for &j in &ladder {
        attempted.push(j);
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] += j;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(CholFactor {
                lower: chol.unpack(),
                jitter_used: j,
            });
        }
    }
    Err(LinalgError::FactorizationFailed { attempted })
}

/// Solves `(A + jI) X = B` using the stored factor.
pub fn solve_spd(f: &CholFactor, b: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    if b.nrows() != f.dim() {
        return Err(LinalgError::DimensionMismatch {
            factor: f.dim(),
            operand: b.nrows(),
        });
    }
    let y = f
        .lower
        .solve_lower_triangular(b)
        .expect("factor has strictly positive diagonal");
    Ok(f.lower
        .tr_solve_lower_triangular(&y)
        .expect("factor has strictly positive diagonal"))
}

/// Solves `(A + jI) x = v` for a single right-hand side.
pub fn solve_spd_vec(f: &CholFactor, v: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    if v.nrows() != f.dim() {
        return Err(LinalgError::DimensionMismatch {
            factor: f.dim(),
            operand: v.nrows(),
        });
    }
    let y = f
        .lower
        .solve_lower_triangular(v)
        .expect("factor has strictly positive diagonal");
    Ok(f.lower
        .tr_solve_lower_triangular(&y)
        .expect("factor has strictly positive diagonal"))
}

/// Quadratic form `v' (A + jI)^-1 v`, computed as `|L^-1 v|^2` with a single
/// triangular solve. Never negative; tiny negative round-off clamps to 0.
pub fn quad_form(f: &CholFactor, v: &DVector<f64>) -> Result<f64, LinalgError> {
    if v.nrows() != f.dim() {
        return Err(LinalgError::DimensionMismatch {
            factor: f.dim(),
            operand: v.nrows(),
        });
    }
    if f.dim() == 0 {
        return Ok(0.0);
    }
    let w = f
        .lower
        .solve_lower_triangular(v)
        .expect("factor has strictly positive diagonal");
    Ok(w.norm_squared().max(0.0))
}

/// `ln det(A + jI)` as twice the log-sum of the factor's diagonal.
pub fn logdet(f: &CholFactor) -> f64 {
    2.0 * f.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

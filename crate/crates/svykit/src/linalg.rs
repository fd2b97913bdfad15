//! Small dense solves used by the regression and calibration code.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub const COND_WARN: f64 = 1e12;
const PINV_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Solved {
    pub x: DVector<f64>,
    pub cond: f64,
    pub pseudo_inverse: bool,
}

impl Solved {
    pub fn ill_conditioned(&self) -> bool {
        self.cond > COND_WARN
    }
}

/// Solve `a x = b` with a full-pivot LU. Rank-deficient systems fall back to
/// the SVD pseudo-inverse when `allow_pinv` is set.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, allow_pinv: bool) -> Result<Solved> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Solved { x: DVector::zeros(0), cond: 1.0, pseudo_inverse: false });
    }
    let sv = a.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smax.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entries".into()));
    }
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if smax > 0.0 && smin > PINV_RTOL * smax {
        let lu = a.clone().full_piv_lu();
        if let Some(x) = lu.solve(b) {
            return Ok(Solved { x, cond, pseudo_inverse: false });
        }
    }
    if !allow_pinv {
        return Err(Error::Singular(format!("condition number {cond:.3e}")));
    }
    let svd = a.clone().svd(true, true);
    let tol = PINV_RTOL * smax.max(f64::MIN_POSITIVE);
    let x = svd
        .solve(b, tol)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(Solved { x, cond, pseudo_inverse: true })
}

/// Inverse (or pseudo-inverse) of a symmetric matrix.
pub fn inverse(a: &DMatrix<f64>, allow_pinv: bool) -> Result<(DMatrix<f64>, bool)> {
    let n = a.nrows();
    let sv = a.clone().singular_values();
    let smax = if n > 0 { sv.max() } else { 0.0 };
    let smin = if n > 0 { sv.min() } else { 0.0 };
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), false));
    }
    if smax > 0.0 && smin > PINV_RTOL * smax {
        if let Some(inv) = a.clone().try_inverse() {
            return Ok((inv, false));
        }
    }
    if !allow_pinv {
        return Err(Error::Singular("matrix is not invertible".into()));
    }
    let p = a
        .clone()
        .pseudo_inverse(PINV_RTOL * smax.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((p, true))
}

/// Weighted cross products `(Σ w x xᵀ, Σ w x y)`.
pub fn cross(rows: &[Vec<f64>], w: &[f64], y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let p = rows.first().map_or(0, |r| r.len());
    let mut a = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    for ((x, &wi), &yi) in rows.iter().zip(w).zip(y) {
        for j in 0..p {
            b[j] += wi * x[j] * yi;
            for k in 0..p {
                a[(j, k)] += wi * x[j] * x[k];
            }
        }
    }
    (a, b)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

//! Regression, post-stratification and raking.

use super::{aligned, Estimate};
use crate::error::{input, Error, Result};
use crate::frame::Sample;
use crate::linalg::{cross, inverse, solve};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Final weight over design weight.
    pub g_weights: Vec<f64>,
    pub weights: Vec<f64>,
    pub c: Vec<f64>,
    /// Sup-norm of `Σ w x − X`.
    pub calibration_residual: f64,
    /// `X̂ᵀβ̂` summed over the population totals.
    pub projection: f64,
    /// `c_i` lies in the span of `x_i`: with weights `d_i/c_i` the weighted
    /// residuals then sum to zero and projection equals the debiased form.
    pub ibc: bool,
    pub pseudo_inverse: bool,
    pub ill_conditioned: bool,
}

/// Does `v_i = λᵀx_i` hold for some λ (to a relative 1e-9)?
pub(crate) fn in_span(x: &[Vec<f64>], v: &[f64]) -> bool {
    let ones = vec![1.0; v.len()];
    let (a, b) = cross(x, &ones, v);
    let Ok(sol) = solve(&a, &b, true) else { return false };
    let scale = v.iter().fold(0.0f64, |m, z| m.max(z.abs())).max(f64::MIN_POSITIVE);
    x.iter()
        .zip(v)
        .all(|(xi, vi)| (xi.iter().zip(sol.x.iter()).map(|(a, b)| a * b).sum::<f64>() - vi).abs() <= 1e-9 * scale)
}

/// Generalized regression fit of `y` on `x` with weights `d/c`.
pub fn regression_fit(
    d: &[f64],
    y: &[f64],
    x: &[Vec<f64>],
    x_totals: &[f64],
    c: &[f64],
    allow_pinv: bool,
) -> Result<RegressionFit> {
    let n = d.len();
    if y.len() != n || x.len() != n || c.len() != n {
        return input("d, y, x and c must be aligned");
    }
    let p = x_totals.len();
    if x.iter().any(|r| r.len() != p) {
        return input(format!("every x row needs {p} entries to match the totals"));
    }
    if c.iter().any(|&v| !(v > 0.0)) {
        return input("working variances c must be positive");
    }
    let wc: Vec<f64> = d.iter().zip(c).map(|(d, c)| d / c).collect();
    let (a, b) = cross(x, &wc, y);
    let (ainv, pinv) = inverse(&a, allow_pinv)?;
    let cond = {
        let sv = a.clone().singular_values();
        if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY }
    };
    let beta = &ainv * &b;
    let mut xh = DVector::zeros(p);
    for (xi, di) in x.iter().zip(d) {
        for j in 0..p {
            xh[j] += di * xi[j];
        }
    }
    let gap = DVector::from_column_slice(x_totals) - xh;
    let lam = &ainv * gap;
    let mut weights = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for i in 0..n {
        let xi = DVector::from_column_slice(&x[i]);
        let w = d[i] + d[i] / c[i] * xi.dot(&lam);
        weights.push(w);
        g.push(w / d[i]);
        residuals.push(y[i] - xi.dot(&beta));
    }
    let mut resid: f64 = 0.0;
    for j in 0..p {
        let s: f64 = weights.iter().zip(x).map(|(w, xi)| w * xi[j]).sum();
        resid = resid.max((s - x_totals[j]).abs());
    }
    let projection = x_totals.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
    Ok(RegressionFit {
        coefficients: beta.iter().copied().collect(),
        residuals,
        g_weights: g,
        weights,
        c: c.to_vec(),
        calibration_residual: resid,
        projection,
        ibc: in_span(x, c),
        pseudo_inverse: pinv,
        ill_conditioned: cond > crate::linalg::COND_WARN,
    })
}

/// Debiased GREG `Ŷ_HT + (X − X̂_HT)ᵀβ̂_c`, equal to `Σ w_i y_i` with the
/// calibrated weights.
pub fn regression_greg(
    sample: &Sample,
    y: &[f64],
    x: &[Vec<f64>],
    x_totals: &[f64],
    c: &[f64],
    allow_pinv: bool,
) -> Result<(Estimate, RegressionFit)> {
    aligned(sample, y, "y")?;
    let d = sample.weights();
    let fit = regression_fit(&d, y, x, x_totals, c, allow_pinv)?;
    let value: f64 = fit.weights.iter().zip(y).map(|(w, y)| w * y).sum();
    let mut e = Estimate::point(value, "greg").diag("projection", fit.projection);
    if fit.ibc {
        e.flag("ibc");
    }
    if fit.pseudo_inverse {
        e.flag("pseudo_inverse");
    }
    if fit.ill_conditioned {
        e.flag("ill_conditioned");
    }
    if fit.weights.iter().any(|&w| w < 0.0) {
        e.flag("negative_weights");
    }
    Ok((e, fit))
}

/// Post-stratified estimator `Σ_g N_g Ŷ_g / N̂_g` and its weights.
pub fn post_stratify(sample: &Sample, y: &[f64], groups: &[usize], pop_counts: &[f64]) -> Result<(Estimate, Vec<f64>)> {
    aligned(sample, y, "y")?;
    if groups.len() != y.len() {
        return input("group labels must align with y");
    }
    let d = sample.weights();
    let mut nhat = vec![0.0; pop_counts.len()];
    for (k, &g) in groups.iter().enumerate() {
        if g >= pop_counts.len() {
            return input(format!("group {g} has no population count"));
        }
        nhat[g] += d[k];
    }
    for (g, (&nh, &ng)) in nhat.iter().zip(pop_counts).enumerate() {
        if nh == 0.0 && ng > 0.0 {
            return Err(Error::Data(format!("post-stratum {g} is empty in the sample but has N_g = {ng}")));
        }
    }
    let w: Vec<f64> = groups.iter().zip(&d).map(|(&g, d)| d * pop_counts[g] / nhat[g]).collect();
    let v = w.iter().zip(y).map(|(w, y)| w * y).sum();
    Ok((Estimate::point(v, "post_stratified"), w))
}

/// One raking dimension: a group label per unit and the target per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub groups: Vec<usize>,
    pub totals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RakeResult {
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm residual per margin.
    pub residuals: Vec<f64>,
}

fn margin_residual(w: &[f64], m: &Margin) -> f64 {
    let mut s = vec![0.0; m.totals.len()];
    for (wi, &g) in w.iter().zip(&m.groups) {
        s[g] += wi;
    }
    s.iter().zip(&m.totals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Iterative proportional fitting over any number of margins. One
/// iteration adjusts every margin once in turn.
pub fn rake(d: &[f64], margins: &[Margin], tol: f64, max_iter: usize) -> Result<RakeResult> {
    for m in margins {
        if m.groups.len() != d.len() {
            return input("margin labels must align with the weights");
        }
        if m.groups.iter().any(|&g| g >= m.totals.len()) {
            return input("margin label without a target");
        }
        if m.totals.iter().any(|&t| !(t > 0.0)) {
            return input("raking targets must be positive");
        }
    }
    let mut w = d.to_vec();
    let converged = |w: &[f64]| margins.iter().all(|m| margin_residual(w, m) < tol);
    if converged(&w) {
        return Ok(RakeResult { residuals: margins.iter().map(|m| margin_residual(&w, m)).collect(), weights: w, iterations: 0 });
    }
    for it in 1..=max_iter {
        for m in margins {
            let mut s = vec![0.0; m.totals.len()];
            for (wi, &g) in w.iter().zip(&m.groups) {
                s[g] += wi;
            }
            if let Some(g) = (0..s.len()).find(|&g| s[g] == 0.0) {
                return Err(Error::Data(format!("margin group {g} has zero weight but target {}", m.totals[g])));
            }
            for (wi, &g) in w.iter_mut().zip(&m.groups) {
                *wi *= m.totals[g] / s[g];
            }
        }
        if converged(&w) {
            return Ok(RakeResult { residuals: margins.iter().map(|m| margin_residual(&w, m)).collect(), weights: w, iterations: it });
        }
    }
    let res: Vec<f64> = margins.iter().map(|m| margin_residual(&w, m)).collect();
    Err(Error::NoConvergence { iterations: max_iter, detail: format!("margin residuals {res:?}") })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combined {
    pub x_c: Vec<f64>,
    /// Weight matrix on the first estimate, row-major.
    pub w: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
}

fn mat(v: &[Vec<f64>], p: usize) -> Result<DMatrix<f64>> {
    if v.len() != p || v.iter().any(|r| r.len() != p) {
        return input(format!("expected a {p}x{p} matrix"));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| v[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// GLS combination `X_c = W X̂₁ + (I − W) X̂₂` with `W = V₂(V₁ + V₂)⁻¹`.
pub fn nonnested_combine(x1: &[f64], x2: &[f64], v1: &[Vec<f64>], v2: &[Vec<f64>]) -> Result<Combined> {
    let p = x1.len();
    if x2.len() != p {
        return input("X̂₁ and X̂₂ differ in length");
    }
    let m1 = mat(v1, p)?;
    let m2 = mat(v2, p)?;
    let (inv, _) = inverse(&(&m1 + &m2), false)?;
    let w = &m2 * &inv;
    let id = DMatrix::<f64>::identity(p, p);
    let xc = &w * DVector::from_column_slice(x1) + (&id - &w) * DVector::from_column_slice(x2);
    let var = &m1 * &inv * &m2;
    Ok(Combined { x_c: xc.iter().copied().collect(), w: rows(&w), variance: rows(&var) })
}

/// `Ŷ₂ + (X_c − X̂₂)ᵀβ̂_q` from the second sample.
pub fn nonnested_regression(sample2: &Sample, y: &[f64], x: &[Vec<f64>], x_c: &[f64], q: &[f64]) -> Result<(Estimate, RegressionFit)> {
    let (mut e, fit) = regression_greg(sample2, y, x, x_c, q, false)?;
    e.method = "nonnested_regression".into();
    Ok((e, fit))
}

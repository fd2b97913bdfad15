//! Unit nonresponse: response propensity fitting, propensity-score and
//! regression weighting, calibration weighting, and the reverse-framework
//! variance of the PS estimator.

use crate::calibration::{solve_dual, CalibrationResult, DualProblem, Entropy, SolverOptions};
use crate::error::{input, Error, Result};
use crate::estimators::Estimate;
use crate::frame::Sample;
use crate::linalg::{cross, dot, solve};
use crate::variance::{engine_variance, Engine};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Norm of φ̂ beyond which the fit is treated as separated.
pub const SEPARATION_NORM: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct ResponseData {
    /// The full sample A, respondents and nonrespondents, with base weights.
    pub sample: Sample,
    pub delta: Vec<bool>,
    /// Response-model covariates, one row per sampled unit.
    pub x: Vec<Vec<f64>>,
    /// Study value, present exactly for respondents.
    pub y: Vec<Option<f64>>,
}

impl ResponseData {
    pub fn new(sample: Sample, delta: Vec<bool>, x: Vec<Vec<f64>>, y: Vec<Option<f64>>) -> Result<Self> {
        let n = sample.len();
        if delta.len() != n || x.len() != n || y.len() != n {
            return input("delta, x and y must have one entry per sampled unit");
        }
        let p = x.first().map_or(0, |r| r.len());
        if p == 0 || x.iter().any(|r| r.len() != p) {
            return input("x rows must be non-empty and of equal length");
        }
        for (i, (d, v)) in delta.iter().zip(&y).enumerate() {
            if *d != v.is_some() {
                return Err(Error::Data(format!("unit {i}: y must be present exactly when delta = 1")));
            }
        }
        if sample.selections.iter().any(|s| !(s.pi > 0.0)) {
            return Err(Error::Data("sample is missing inclusion probabilities".into()));
        }
        Ok(ResponseData { sample, delta, x, y })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.sample.weights()
    }

    pub fn respondents(&self) -> Vec<usize> {
        (0..self.delta.len()).filter(|&i| self.delta[i]).collect()
    }

    fn y_or_zero(&self) -> Vec<f64> {
        self.y.iter().map(|v| v.unwrap_or(0.0)).collect()
    }

    fn dim(&self) -> usize {
        self.x[0].len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityFit {
    pub phi: Vec<f64>,
    pub p_hat: Vec<f64>,
    /// h(x; φ̂) = p̂ x for the logistic model.
    pub h: Vec<Vec<f64>>,
    pub iterations: usize,
    pub score_norm: f64,
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Logistic response model fitted by solving
/// `Σ w (δ/p − 1) b(x) = 0`. With `b = None` this is the pseudo-likelihood
/// score (b = h = p x), solved by Fisher scoring; otherwise Newton on the
/// calibration form.
pub fn fit_propensity(data: &ResponseData, b: Option<&[Vec<f64>]>) -> Result<PropensityFit> {
    const MAX_ITER: usize = 100;
    const TOL: f64 = 1e-12;
    let w = data.weights();
    let q = data.dim();
    if let Some(b) = b {
        if b.len() != data.x.len() || b.iter().any(|r| r.len() != q) {
            return input("b must have one row per unit and dim(x) columns");
        }
    }
    if data.respondents().is_empty() {
        return Err(Error::Data("no respondents".into()));
    }
    let mut phi = DVector::<f64>::zeros(q);
    let xs: Vec<DVector<f64>> = data.x.iter().map(|r| DVector::from_column_slice(r)).collect();
    for iter in 0..=MAX_ITER {
        let p: Vec<f64> = xs.iter().map(|x| logistic(x.dot(&phi))).collect();
        let mut score = DVector::zeros(q);
        let mut info = DMatrix::zeros(q, q);
        for i in 0..xs.len() {
            let d = if data.delta[i] { 1.0 } else { 0.0 };
            match b {
                None => {
                    score += &xs[i] * (w[i] * (d - p[i]));
                    info += &xs[i] * xs[i].transpose() * (w[i] * p[i] * (1.0 - p[i]));
                }
                Some(b) => {
                    let bi = DVector::from_column_slice(&b[i]);
                    score += &bi * (w[i] * (d / p[i] - 1.0));
                    // −∂U/∂φ = Σ w δ (1−p)/p b xᵀ
                    info += &bi * xs[i].transpose() * (w[i] * d * (1.0 - p[i]) / p[i]);
                }
            }
        }
        let norm = score.amax();
        if norm < TOL * w.iter().sum::<f64>().max(1.0) {
            let h = data.x.iter().zip(&p).map(|(x, &pi)| x.iter().map(|v| pi * v).collect()).collect();
            return Ok(PropensityFit { phi: phi.iter().copied().collect(), p_hat: p, h, iterations: iter, score_norm: norm });
        }
        if iter == MAX_ITER {
            break;
        }
        let step = solve(&info, &score, false)?;
        phi += step.x;
        if phi.norm() > SEPARATION_NORM {
            return Err(Error::Numerical(format!(
                "response model appears separated: |phi| = {:.1} exceeds {SEPARATION_NORM}",
                phi.norm()
            )));
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITER, detail: "propensity score equation".into() })
}

fn check_p(data: &ResponseData, p_hat: &[f64]) -> Result<()> {
    if p_hat.len() != data.delta.len() {
        return input("p_hat must have one entry per sampled unit");
    }
    for i in data.respondents() {
        if !(p_hat[i] > 0.0 && p_hat[i] <= 1.0) {
            return input(format!("respondent {i} has propensity {} outside (0,1]", p_hat[i]));
        }
    }
    Ok(())
}

/// `Σ_{A_R} w y / p̂`
pub fn ps_estimator(data: &ResponseData, p_hat: &[f64]) -> Result<Estimate> {
    check_p(data, p_hat)?;
    let w = data.weights();
    let v: f64 = data.respondents().iter().map(|&i| w[i] * data.y[i].unwrap() / p_hat[i]).sum();
    let resp = data.respondents().len() as f64;
    let mut e = Estimate::point(v, "ps");
    e.n_effective = Some(resp);
    Ok(e)
}

/// Regression weighting on respondents:
/// `w_i = d_i (Σ_A d x)ᵀ (Σ_{A_R} d x xᵀ)⁻¹ x_i`, zero for nonrespondents.
pub fn nwa_regression_weights(data: &ResponseData) -> Result<Vec<f64>> {
    let d = data.weights();
    let q = data.dim();
    let resp = data.respondents();
    let rows: Vec<Vec<f64>> = resp.iter().map(|&i| data.x[i].clone()).collect();
    let dr: Vec<f64> = resp.iter().map(|&i| d[i]).collect();
    let (m, _) = cross(&rows, &dr, &vec![0.0; rows.len()]);
    let mut tx = DVector::zeros(q);
    for (x, di) in data.x.iter().zip(&d) {
        tx += DVector::from_column_slice(x) * *di;
    }
    let lam = solve(&m, &tx, false)?.x;
    let lam: Vec<f64> = lam.iter().copied().collect();
    let mut out = vec![0.0; d.len()];
    for &i in &resp {
        out[i] = d[i] * dot(&data.x[i], &lam);
    }
    Ok(out)
}

/// Components of the PS variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsVariance {
    pub estimate: Estimate,
    pub v1: f64,
    pub v2: f64,
    pub b_star: Vec<f64>,
    pub eta: Vec<f64>,
}

/// `B̂* = (Σ_{A_R} w p̂⁻²(1−p̂) ĥ bᵀ)⁻¹ Σ_{A_R} w p̂⁻²(1−p̂) ĥ y`
pub fn ps_b_star(data: &ResponseData, p_hat: &[f64], h: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_p(data, p_hat)?;
    let w = data.weights();
    let k = b.first().map_or(0, |r| r.len());
    if h.len() != p_hat.len() || b.len() != p_hat.len() || h.iter().any(|r| r.len() != k) {
        return input("h and b must be n rows of equal width");
    }
    let mut m = DMatrix::zeros(k, k);
    let mut r = DVector::zeros(k);
    for i in data.respondents() {
        let c = w[i] * (1.0 - p_hat[i]) / (p_hat[i] * p_hat[i]);
        let hi = DVector::from_column_slice(&h[i]);
        m += &hi * DVector::from_column_slice(&b[i]).transpose() * c;
        r += hi * (c * data.y[i].unwrap());
    }
    // all p̂ = 1 leaves a zero system; the pseudo-inverse then gives B̂* = 0
    Ok(solve(&m, &r, true)?.x.iter().copied().collect())
}

/// `V̂ = V̂₁ + V̂₂`: the design variance of Σ w η̂ under `engine`, plus
/// `Σ_{A_R} w (1−p̂)/p̂² (y − bᵀB̂*)²`. `b = None` uses `h`.
pub fn ps_variance(
    data: &ResponseData,
    p_hat: &[f64],
    h: &[Vec<f64>],
    b: Option<&[Vec<f64>]>,
    engine: &Engine,
) -> Result<PsVariance> {
    let b = b.unwrap_or(h);
    let bs = ps_b_star(data, p_hat, h, b)?;
    let w = data.weights();
    let y = data.y_or_zero();
    let mut eta = Vec::with_capacity(w.len());
    let mut v2 = 0.0;
    for i in 0..w.len() {
        let fit = dot(&b[i], &bs);
        let mut e = fit;
        if data.delta[i] {
            let r = y[i] - fit;
            e += r / p_hat[i];
            v2 += w[i] * (1.0 - p_hat[i]) / (p_hat[i] * p_hat[i]) * r * r;
        }
        eta.push(e);
    }
    let v1 = engine_variance(&data.sample, &eta, engine)?;
    let point = ps_estimator(data, p_hat)?;
    let estimate = Estimate::point(point.value, "ps/reverse")
        .with_variance(v1 + v2)
        .diag("v1", v1)
        .diag("v2", v2);
    Ok(PsVariance { estimate, v1, v2, b_star: bs, eta })
}

/// Generalized-entropy calibration for nonresponse. Minimizes
/// `Σ_{A_R} w₁ G(ω₂) c` subject to `Σ_{A_R} w₁ ω₂ z = Σ_A w₁ z` with
/// `z = (x, ĝ c)` and `ĝ = g(1/p̂)`. Returned weights are `w₁ ω₂`
/// (zero for nonrespondents); the solver starts at ω₂ = 1/p̂.
pub fn gec_nonresponse(
    data: &ResponseData,
    p_hat: &[f64],
    entropy: Entropy,
    c: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<CalibrationResult> {
    check_p(data, p_hat)?;
    entropy.validate()?;
    let w = data.weights();
    let n = w.len();
    let c: Vec<f64> = match c {
        Some(c) if c.len() == n => c.to_vec(),
        Some(_) => return input("c must have one entry per sampled unit"),
        None => vec![1.0; n],
    };
    if c.iter().any(|&v| !(v > 0.0)) {
        return input("c must be positive");
    }
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = data.x[i].clone();
        if data.delta[i] {
            let om = 1.0 / p_hat[i];
            if !entropy.in_domain(om) {
                return input(format!("1/p_hat = {om} lies outside the entropy domain"));
            }
            row.push(entropy.g(om) * c[i]);
        } else {
            // ĝ is needed on all of A for the target; nonrespondents have p̂ from the model
            let p = p_hat[i];
            if !(p > 0.0 && p <= 1.0) || !entropy.in_domain(1.0 / p) {
                return input(format!("unit {i} needs a usable propensity for the target total"));
            }
            row.push(entropy.g(1.0 / p) * c[i]);
        }
        z.push(row);
    }
    let k = z[0].len();
    let mut targets = vec![0.0; k];
    for (row, wi) in z.iter().zip(&w) {
        for j in 0..k {
            targets[j] += wi * row[j];
        }
    }
    let resp = data.respondents();
    let zr: Vec<Vec<f64>> = resp.iter().map(|&i| z[i].clone()).collect();
    let problem = DualProblem {
        entropy,
        a: resp.iter().map(|&i| w[i]).collect(),
        b: vec![0.0; resp.len()],
        v: resp.iter().map(|&i| c[i]).collect(),
        z: &zr,
        targets: &targets,
    };
    let mut lambda0 = vec![0.0; k];
    lambda0[k - 1] = 1.0;
    let mut res = solve_dual(&problem, lambda0, opts)?;
    let mut full = vec![0.0; n];
    for (j, &i) in resp.iter().enumerate() {
        full[i] = res.weights[j];
    }
    res.weights = full;
    Ok(res)
}

//! Area-level Fay-Herriot model: fitting, EBLUP, MSE estimation and optimal
//! composite weighting.

use crate::error::{input, Error, Result};
use crate::estimators::Estimate;
use crate::linalg::{cross, dot, inverse};
use crate::rng::RngStream;
use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const MAX_ITER: usize = 500;
const TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaData {
    /// Direct estimates Ŷ_{d,g}.
    pub direct: Vec<f64>,
    /// Known sampling variances V_g.
    pub v: Vec<f64>,
    /// Area covariates X̄_g.
    pub x: Vec<Vec<f64>>,
}

impl AreaData {
    pub fn new(direct: Vec<f64>, v: Vec<f64>, x: Vec<Vec<f64>>) -> Result<Self> {
        let g = direct.len();
        if v.len() != g || x.len() != g {
            return input("direct, v and x must have one entry per area");
        }
        let p = x.first().map_or(0, |r| r.len());
        if p == 0 || x.iter().any(|r| r.len() != p) {
            return input("covariate rows must be non-empty and of equal length");
        }
        if g <= p + 1 {
            return input(format!("{g} areas are too few for {p} covariates"));
        }
        if let Some(i) = v.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Data(format!("area {i} has non-positive sampling variance")));
        }
        if direct.iter().chain(x.iter().flatten()).any(|a| !a.is_finite()) {
            return Err(Error::Data("non-finite direct estimate or covariate".into()));
        }
        Ok(AreaData { direct, v, x })
    }

    pub fn len(&self) -> usize {
        self.direct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.direct.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FayHerriotModel {
    pub data: AreaData,
    pub beta: Vec<f64>,
    pub sigma2_u: f64,
    /// α̂_g = σ̂²/(V_g + σ̂²)
    pub alpha: Vec<f64>,
    /// (Σ X̄ X̄ᵀ/(σ̂² + V))⁻¹
    pub v_beta: Vec<Vec<f64>>,
    /// 2/Σ (σ̂² + V_g)⁻²
    pub v_sigma2: f64,
    pub iterations: usize,
    /// σ̂² was floored at zero.
    pub boundary: bool,
}

fn gls(data: &AreaData, s2: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let w: Vec<f64> = data.v.iter().map(|v| 1.0 / (s2 + v)).collect();
    let (m, r) = cross(&data.x, &w, &data.direct);
    let (inv, _) = inverse(&m, false)?;
    let b = &inv * r;
    let vb = (0..inv.nrows()).map(|i| inv.row(i).iter().copied().collect()).collect();
    Ok((b.iter().copied().collect(), vb))
}

/// Alternates GLS for β with weights 1/(σ² + V_g) and the reweighted
/// moment step for σ², `Σ (Z_g − V_g − σ²)/(σ² + V_g)² = 0` with
/// `Z_g = (Ŷ_g − X̄_gᵀβ)²`, until |Δσ²| < 1e-10. σ² is floored at zero.
pub fn fit_fay_herriot(data: &AreaData) -> Result<FayHerriotModel> {
    let data = AreaData::new(data.direct.clone(), data.v.clone(), data.x.clone())?;
    let mean_v = data.v.iter().sum::<f64>() / data.len() as f64;
    // start from the unweighted moment estimate
    let (b0, _) = gls(&data, 1e6 * mean_v.max(1.0))?;
    let z0: Vec<f64> = (0..data.len()).map(|g| (data.direct[g] - dot(&data.x[g], &b0)).powi(2)).collect();
    let mut s2 = (z0.iter().zip(&data.v).map(|(z, v)| z - v).sum::<f64>() / data.len() as f64).max(0.0);
    for iter in 1..=MAX_ITER {
        let (beta, _) = gls(&data, s2)?;
        let (mut num, mut den) = (0.0, 0.0);
        for g in 0..data.len() {
            let z = (data.direct[g] - dot(&data.x[g], &beta)).powi(2);
            let k = 1.0 / (s2 + data.v[g]).powi(2);
            num += k * (z - data.v[g]);
            den += k;
        }
        let next = (num / den).max(0.0);
        let change = (next - s2).abs();
        s2 = next;
        if change < TOL * s2.max(1.0) {
            return Ok(finish(data, s2, iter));
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITER, detail: "Fay-Herriot variance component".into() })
}

fn finish(data: AreaData, s2: f64, iterations: usize) -> FayHerriotModel {
    let (beta, v_beta) = gls(&data, s2).expect("GLS system solved during iteration");
    let alpha = data.v.iter().map(|v| s2 / (v + s2)).collect();
    let v_sigma2 = 2.0 / data.v.iter().map(|v| (s2 + v).powi(-2)).sum::<f64>();
    FayHerriotModel { data, beta, sigma2_u: s2, alpha, v_beta, v_sigma2, iterations, boundary: s2 == 0.0 }
}

impl FayHerriotModel {
    pub fn synthetic(&self, g: usize) -> f64 {
        dot(&self.data.x[g], &self.beta)
    }

    /// V̂(α̂_g) ≈ {V_g/(σ̂² + V_g)²}² V̂(σ̂²)
    pub fn v_alpha(&self, g: usize) -> f64 {
        let v = self.data.v[g];
        (v / (self.sigma2_u + v).powi(2)).powi(2) * self.v_sigma2
    }

    fn xvx(&self, g: usize) -> f64 {
        let x = &self.data.x[g];
        let mut s = 0.0;
        for (i, xi) in x.iter().enumerate() {
            for (j, xj) in x.iter().enumerate() {
                s += xi * self.v_beta[i][j] * xj;
            }
        }
        s
    }

    /// α̂V̂_g + (1−α̂)² X̄ᵀV̂(β̂)X̄ + 2V̂(α̂)(V̂_g + σ̂²)
    pub fn prasad_rao_mse(&self, g: usize) -> f64 {
        let a = self.alpha[g];
        let v = self.data.v[g];
        a * v + (1.0 - a).powi(2) * self.xvx(g) + 2.0 * self.v_alpha(g) * (v + self.sigma2_u)
    }

    /// EBLUP α̂ Ŷ_d + (1 − α̂) X̄ᵀβ̂, with the Prasad-Rao MSE as its variance.
    pub fn eblup(&self, g: usize) -> Result<Estimate> {
        if g >= self.data.len() {
            return input(format!("area {g} out of range"));
        }
        let a = self.alpha[g];
        let value = a * self.data.direct[g] + (1.0 - a) * self.synthetic(g);
        let mut e = Estimate::point(value, "eblup/fay_herriot")
            .with_variance(self.prasad_rao_mse(g))
            .diag("alpha", a)
            .diag("synthetic", self.synthetic(g));
        if self.boundary {
            e.flag("sigma2_u_at_zero");
        }
        Ok(e)
    }

    pub fn eblups(&self) -> Vec<f64> {
        (0..self.data.len())
            .map(|g| self.alpha[g] * self.data.direct[g] + (1.0 - self.alpha[g]) * self.synthetic(g))
            .collect()
    }
}

pub fn eblup(model: &FayHerriotModel, g: usize) -> Result<Estimate> {
    model.eblup(g)
}

pub fn prasad_rao_mse(model: &FayHerriotModel, g: usize) -> f64 {
    model.prasad_rao_mse(g)
}

/// Parametric bootstrap MSE for every area. Replicate b draws
/// Ȳ⁽ᵇ⁾ = X̄ᵀβ̂ + u, u ~ N(0, σ̂²), then Ŷ⁽ᵇ⁾ ~ N(Ȳ⁽ᵇ⁾, V_g), refits the
/// model and records (Ŷ*⁽ᵇ⁾ − Ȳ⁽ᵇ⁾)². Replicates run in parallel, each on
/// its own stream.
pub fn bootstrap_mse(model: &FayHerriotModel, b: usize, seed: u64) -> Result<Vec<f64>> {
    if b == 0 {
        return input("bootstrap needs at least one replicate");
    }
    let gn = model.data.len();
    let sd_u = model.sigma2_u.sqrt();
    let reps: Vec<Result<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::replicate(seed, r as u64).rng();
            let mut truth = Vec::with_capacity(gn);
            let mut direct = Vec::with_capacity(gn);
            for g in 0..gn {
                let u: f64 = StandardNormal.sample(&mut rng);
                let e: f64 = StandardNormal.sample(&mut rng);
                let t = model.synthetic(g) + sd_u * u;
                truth.push(t);
                direct.push(t + model.data.v[g].sqrt() * e);
            }
            let d = AreaData { direct, v: model.data.v.clone(), x: model.data.x.clone() };
            let m = fit_fay_herriot(&d)?;
            Ok(m.eblups().iter().zip(&truth).map(|(a, t)| (a - t).powi(2)).collect())
        })
        .collect();
    let mut acc = vec![0.0; gn];
    for r in reps {
        for (a, v) in acc.iter_mut().zip(r?) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|s| s / b as f64).collect())
}

/// α* = MSE_s/(MSE_d + MSE_s); value α*·direct + (1−α*)·synthetic, with
/// the approximate MSE α*²MSE_d + (1−α*)²MSE_s.
pub fn composite_smallarea(direct: f64, synthetic: f64, mse_d: f64, mse_s: f64) -> Result<Estimate> {
    if !(mse_d >= 0.0 && mse_s >= 0.0) || mse_d + mse_s == 0.0 {
        return input("MSEs must be non-negative and not both zero");
    }
    let a = mse_s / (mse_d + mse_s);
    let value = a * direct + (1.0 - a) * synthetic;
    let mse = a * a * mse_d + (1.0 - a) * (1.0 - a) * mse_s;
    Ok(Estimate::point(value, "composite/small_area").with_variance(mse).diag("alpha", a))
}

/// Simulate Fay-Herriot area data with known parameters.
pub fn simulate_areas(x: &[Vec<f64>], beta: &[f64], sigma2_u: f64, v: &[f64], stream: RngStream) -> (AreaData, Vec<f64>) {
    let mut rng = stream.rng();
    let b = DVector::from_column_slice(beta);
    let mut truth = Vec::new();
    let mut direct = Vec::new();
    for (xg, vg) in x.iter().zip(v) {
        let u: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        let t = DVector::from_column_slice(xg).dot(&b) + sigma2_u.sqrt() * u;
        truth.push(t);
        direct.push(t + vg.sqrt() * e);
    }
    (AreaData { direct, v: v.to_vec(), x: x.to_vec() }, truth)
}

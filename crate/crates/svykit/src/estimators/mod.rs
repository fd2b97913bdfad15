//! Design-based point estimators.

mod regression;
mod twophase;

pub use regression::*;
pub use twophase::*;

use crate::error::{input, Error, Result};
use crate::frame::Sample;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Multiplier for the reported 95% interval, the conventional rounded value.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub variance: Option<f64>,
    pub se: Option<f64>,
    pub ci95: Option<[f64; 2]>,
    pub method: String,
    pub n_effective: Option<f64>,
    pub flags: Vec<String>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl Estimate {
    pub fn point(value: f64, method: impl Into<String>) -> Self {
        Estimate {
            value,
            variance: None,
            se: None,
            ci95: None,
            method: method.into(),
            n_effective: None,
            flags: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    /// Attach a variance. Negative values are kept and flagged; se and the
    /// interval are then left empty.
    pub fn with_variance(mut self, v: f64) -> Self {
        self.variance = Some(v);
        if v >= 0.0 {
            let se = v.sqrt();
            self.se = Some(se);
            self.ci95 = Some([self.value - Z95 * se, self.value + Z95 * se]);
        } else {
            self.se = None;
            self.ci95 = None;
            self.flag("negative_variance");
        }
        self
    }

    pub fn flag(&mut self, f: &str) {
        if !self.flags.iter().any(|g| g == f) {
            self.flags.push(f.to_string());
        }
    }

    pub fn diag(mut self, key: &str, v: f64) -> Self {
        self.diagnostics.insert(key.to_string(), v);
        self
    }

    /// Multiply the value by `c` (variance by c²), e.g. total → mean.
    pub fn scale(mut self, c: f64) -> Self {
        self.value *= c;
        if let Some(v) = self.variance {
            return self.with_variance(v * c * c);
        }
        self
    }
}

pub(crate) fn aligned(sample: &Sample, y: &[f64], what: &str) -> Result<()> {
    if y.len() != sample.len() {
        return input(format!("{what} has {} values for {} sampled units", y.len(), sample.len()));
    }
    if sample.selections.iter().any(|s| !(s.pi > 0.0) || !s.pi.is_finite()) {
        return Err(Error::Data("sample is missing inclusion probabilities".into()));
    }
    Ok(())
}

/// `Σ m_i y_i / π_i`; for with-replacement samples this is the Hansen-Hurwitz form.
pub fn ht_total(sample: &Sample, y: &[f64]) -> Result<Estimate> {
    aligned(sample, y, "y")?;
    let v = sample.weights().iter().zip(y).map(|(w, y)| w * y).sum();
    Ok(Estimate::point(v, "ht_total"))
}

pub fn ht_mean(sample: &Sample, y: &[f64], pop_size: f64) -> Result<Estimate> {
    if !(pop_size > 0.0) {
        return input("population size must be positive");
    }
    let mut e = ht_total(sample, y)?.scale(1.0 / pop_size);
    e.method = "ht_mean".into();
    Ok(e)
}

pub fn hajek_mean(sample: &Sample, y: &[f64]) -> Result<Estimate> {
    aligned(sample, y, "y")?;
    let w = sample.weights();
    let nhat: f64 = w.iter().sum();
    let t: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    Ok(Estimate::point(t / nhat, "hajek_mean").diag("n_hat", nhat))
}

/// `n⁻¹ Σ_k y_{a_k}/p_{a_k}` over the n draws.
pub fn hh_total(sample: &Sample, y: &[f64]) -> Result<Estimate> {
    aligned(sample, y, "y")?;
    if !sample.with_replacement {
        return input("Hansen-Hurwitz estimation needs a with-replacement sample");
    }
    let n = sample.draws() as f64;
    let mut t = 0.0;
    for (s, y) in sample.selections.iter().zip(y) {
        let p = s.draw_prob.ok_or_else(|| Error::Data("draw probabilities missing".into()))?;
        t += s.multiplicity as f64 * y / p;
    }
    Ok(Estimate::point(t / n, "hh_total"))
}

/// `X · Ŷ_HT / X̂_HT`. The estimated ratio goes in the diagnostics.
pub fn ratio_estimator(sample: &Sample, y: &[f64], x: &[f64], x_total: f64) -> Result<Estimate> {
    aligned(sample, y, "y")?;
    aligned(sample, x, "x")?;
    let w = sample.weights();
    let yh: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let xh: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    if xh == 0.0 {
        return Err(Error::Numerical("HT estimate of the x total is zero".into()));
    }
    Ok(Estimate::point(x_total * yh / xh, "ratio").diag("ratio", yh / xh).diag("x_hat", xh))
}

/// Upper bound `CV(X̂_HT)` on the relative bias of the ratio estimator.
pub fn ratio_bias_bound(x_hat: f64, var_x_hat: f64) -> f64 {
    var_x_hat.max(0.0).sqrt() / x_hat.abs()
}

pub fn domain_mean(sample: &Sample, y: &[f64], in_domain: &[bool]) -> Result<Estimate> {
    aligned(sample, y, "y")?;
    if in_domain.len() != y.len() {
        return input("domain indicator length differs from y");
    }
    let w = sample.weights();
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..y.len() {
        if in_domain[k] {
            num += w[k] * y[k];
            den += w[k];
        }
    }
    if den == 0.0 {
        return Err(Error::Data("no eligible units in the domain".into()));
    }
    Ok(Estimate::point(num / den, "domain_mean").diag("n_hat", den))
}

/// `F̂(t) = Σ w 1{y ≤ t} / Σ w`.
pub fn ecdf(sample: &Sample, y: &[f64], t: f64) -> Result<f64> {
    aligned(sample, y, "y")?;
    let w = sample.weights();
    let tot: f64 = w.iter().sum();
    Ok(w.iter().zip(y).filter(|(_, &y)| y <= t).map(|(w, _)| w).sum::<f64>() / tot)
}

/// `inf{t : F̂(t) ≥ q}`.
pub fn quantile(sample: &Sample, y: &[f64], q: f64) -> Result<Estimate> {
    aligned(sample, y, "y")?;
    if !(q > 0.0 && q <= 1.0) {
        return input(format!("q = {q} must lie in (0,1]"));
    }
    let w = sample.weights();
    let v = weighted_quantile(&w, y, q);
    Ok(Estimate::point(v, "quantile").diag("q", q))
}

pub(crate) fn weighted_quantile(w: &[f64], y: &[f64], q: f64) -> f64 {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap());
    let tot: f64 = w.iter().sum();
    let mut acc = 0.0;
    let mut k = 0;
    while k < idx.len() {
        // Sum tied values together so F̂ is evaluated at distinct points.
        let v = y[idx[k]];
        while k < idx.len() && y[idx[k]] == v {
            acc += w[idx[k]];
            k += 1;
        }
        if acc / tot >= q - 1e-12 {
            return v;
        }
    }
    y[idx[idx.len() - 1]]
}

/// Root of `Σ w_i U(θ; y_i) = 0` by bracketed secant with bisection fallback.
/// The sum must change sign across the root; for step functions the smallest
/// θ where the sign flips is returned.
pub fn solve_estimating_equation(
    w: &[f64],
    y: &[f64],
    u: impl Fn(f64, f64) -> f64,
    theta0: f64,
    bracket: Option<(f64, f64)>,
) -> Result<Estimate> {
    if w.len() != y.len() || w.is_empty() {
        return input("weights and y must be nonempty and aligned");
    }
    let s = |t: f64| -> f64 { w.iter().zip(y).map(|(w, y)| w * u(t, *y)).sum() };
    let (mut lo, mut hi) = match bracket {
        Some(b) => b,
        None => {
            let step = theta0.abs().max(1.0);
            let (mut a, mut b) = (theta0 - step, theta0 + step);
            let mut k = 0;
            while s(a).signum() == s(b).signum() && s(a) != 0.0 {
                let d = (b - a) * 0.5;
                a -= d;
                b += d;
                k += 1;
                if k > 200 {
                    return Err(Error::NoConvergence { iterations: k, detail: "no sign change found".into() });
                }
            }
            (a, b)
        }
    };
    let (mut flo, mut fhi) = (s(lo), s(hi));
    if flo == 0.0 {
        return Ok(Estimate::point(lo, "estimating_equation"));
    }
    if fhi == 0.0 {
        return Ok(Estimate::point(hi, "estimating_equation"));
    }
    if flo.signum() == fhi.signum() {
        return input("bracket does not contain a sign change");
    }
    let mut it = 0;
    while hi - lo > 1e-10 * (1.0 + lo.abs().max(hi.abs())) {
        it += 1;
        if it > 500 {
            return Err(Error::NoConvergence { iterations: it, detail: format!("bracket [{lo}, {hi}]") });
        }
        let sec = hi - fhi * (hi - lo) / (fhi - flo);
        let mid = 0.5 * (lo + hi);
        // Secant only when it lands well inside; alternate with bisection otherwise.
        let t = if it % 2 == 1 && sec > lo + 0.05 * (hi - lo) && sec < hi - 0.05 * (hi - lo) { sec } else { mid };
        let ft = s(t);
        if ft == 0.0 {
            return Ok(Estimate::point(t, "estimating_equation").diag("iterations", it as f64));
        }
        if ft.signum() == flo.signum() {
            lo = t;
            flo = ft;
        } else {
            hi = t;
            fhi = ft;
        }
    }
    Ok(Estimate::point(hi, "estimating_equation").diag("iterations", it as f64))
}

/// `Σ_U y0 + Σ_A (y − y0)/π`.
pub fn difference_estimator(sample: &Sample, y: &[f64], y0: &[f64], y0_total: f64) -> Result<Estimate> {
    aligned(sample, y, "y")?;
    aligned(sample, y0, "y0")?;
    let v: f64 = sample.weights().iter().zip(y.iter().zip(y0)).map(|(w, (y, z))| w * (y - z)).sum();
    Ok(Estimate::point(y0_total + v, "difference"))
}

/// `α e1 + (1−α) e2`, with the variance-minimizing α when none is given.
pub fn composite(e1: &Estimate, e2: &Estimate, cov: f64, alpha: Option<f64>) -> Result<Estimate> {
    let v1 = e1.variance.ok_or_else(|| Error::Input("first estimate has no variance".into()))?;
    let v2 = e2.variance.ok_or_else(|| Error::Input("second estimate has no variance".into()))?;
    let a = match alpha {
        Some(a) => a,
        None => {
            let den = v1 + v2 - 2.0 * cov;
            if !(den > 0.0) {
                return Err(Error::Numerical("V1 + V2 − 2 Cov is not positive".into()));
            }
            (v2 - cov) / den
        }
    };
    let value = a * e1.value + (1.0 - a) * e2.value;
    let var = a * a * v1 + (1.0 - a) * (1.0 - a) * v2 + 2.0 * a * (1.0 - a) * cov;
    Ok(Estimate::point(value, "composite").with_variance(var).diag("alpha", a))
}

/// Optimal weight on the unmatched-part mean in a rotating survey with
/// `n_u` unmatched units out of `n` and correlation ρ between occasions.
pub fn repeated_survey_alpha(n: f64, n_u: f64, rho: f64) -> f64 {
    (n * n_u - n_u * n_u * rho * rho) / (n * n - n_u * n_u * rho * rho)
}

/// Ratio of means under self-weighting PPS two-stage sampling, from the
/// per-PSU subsample means of y and t. Variance uses the with-replacement
/// form over PSUs.
pub fn pps_two_stage_ratio(y_means: &[f64], t_means: &[f64]) -> Result<Estimate> {
    let n = y_means.len();
    if n != t_means.len() || n < 2 {
        return input("need at least two PSUs with matching y and t means");
    }
    let (sy, st): (f64, f64) = (y_means.iter().sum(), t_means.iter().sum());
    if st == 0.0 {
        return Err(Error::Numerical("denominator mean is zero".into()));
    }
    let theta = sy / st;
    let tbar = st / n as f64;
    let ss: f64 = y_means.iter().zip(t_means).map(|(y, t)| (y - theta * t).powi(2)).sum();
    let v = ss / (n as f64 * (n - 1) as f64) / (tbar * tbar);
    Ok(Estimate::point(theta, "pps_two_stage_ratio").with_variance(v))
}

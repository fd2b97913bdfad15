//! Two-phase estimators.

use super::Estimate;
use crate::error::{input, Error, Result};
use crate::frame::{Frame, Sample};
use crate::linalg::{cross, solve};
use serde::{Deserialize, Serialize};

/// Phase-one units with their phase-two status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseData {
    /// Phase-one weights `1/π_i^(1)`.
    pub w1: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// Observed stratum per phase-one unit.
    pub strata: Option<Vec<usize>>,
    /// Conditional `π_{2i|1}`; NaN for units not in phase two.
    pub pi2: Vec<f64>,
    /// Study value, present exactly for phase-two units.
    pub y: Vec<Option<f64>>,
    /// Phase two was Poisson (independent) given phase one.
    pub poisson_phase2: bool,
}

impl TwoPhaseData {
    pub fn from_sample(sample: &Sample, frame: &Frame, y: &[f64]) -> Result<TwoPhaseData> {
        let a1 = sample
            .phase1
            .as_ref()
            .ok_or_else(|| Error::Input("sample has no phase-one lineage".into()))?;
        if y.len() != frame.len() {
            return input("y must be a frame column");
        }
        let strata = if frame.units().iter().all(|u| u.stratum.is_some()) {
            let labels = frame.strata()?;
            let mut of = vec![0; frame.len()];
            for (h, (_, m)) in labels.iter().enumerate() {
                for &i in m {
                    of[i] = h;
                }
            }
            Some(a1.iter().map(|s| of[s.unit]).collect())
        } else {
            None
        };
        let mut pi2 = vec![f64::NAN; a1.len()];
        let mut yy = vec![None; a1.len()];
        for s in &sample.selections {
            let k = a1
                .iter()
                .position(|t| t.unit == s.unit)
                .ok_or_else(|| Error::Data("phase-two unit outside phase one".into()))?;
            pi2[k] = s.conditional_pi.unwrap_or(1.0);
            yy[k] = Some(y[s.unit]);
        }
        Ok(TwoPhaseData {
            w1: a1.iter().map(|s| 1.0 / s.pi).collect(),
            x: a1.iter().map(|s| frame.unit(s.unit).aux.clone()).collect(),
            strata,
            pi2,
            y: yy,
            poisson_phase2: sample.flags.iter().any(|f| f == "phase2_poisson"),
        })
    }

    pub fn len(&self) -> usize {
        self.w1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w1.is_empty()
    }

    /// Indices of phase-two units.
    pub fn second(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.y[k].is_some()).collect()
    }

    fn check(&self) -> Result<()> {
        let n = self.len();
        if self.x.len() != n || self.pi2.len() != n || self.y.len() != n {
            return input("two-phase columns differ in length");
        }
        if self.second().is_empty() {
            return Err(Error::Data("phase two is empty".into()));
        }
        for k in self.second() {
            if !(self.pi2[k] > 0.0 && self.pi2[k] <= 1.0) {
                return Err(Error::Data(format!("phase-two probability {} outside (0,1]", self.pi2[k])));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoPhaseMode {
    /// Double expansion `Σ_{A2} y/(π^(1) π_{2|1})`.
    Dee,
    /// `Σ_h N̂_h ȳ_{h2}` over observed strata.
    Stratified,
    /// Debiased regression on phase-one x.
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseRegression {
    pub beta: Vec<f64>,
    pub value: f64,
    pub projection: f64,
    pub ibc: bool,
}

/// `β̂₂ = (Σ_{A2} w1 x xᵀ/c)⁻¹ Σ_{A2} w1 x y/c` and the debiased estimator.
pub fn two_phase_regression(data: &TwoPhaseData, c: Option<&[f64]>) -> Result<TwoPhaseRegression> {
    data.check()?;
    let a2 = data.second();
    let ones = vec![1.0; data.len()];
    let c = c.unwrap_or(&ones);
    if c.len() != data.len() {
        return input("c must cover every phase-one unit");
    }
    let xs: Vec<Vec<f64>> = a2.iter().map(|&k| data.x[k].clone()).collect();
    let w: Vec<f64> = a2.iter().map(|&k| data.w1[k] / c[k]).collect();
    let ys: Vec<f64> = a2.iter().map(|&k| data.y[k].unwrap()).collect();
    let (a, b) = cross(&xs, &w, &ys);
    let beta = solve(&a, &b, false)?.x;
    let pred = |k: usize| data.x[k].iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>();
    let projection: f64 = (0..data.len()).map(|k| data.w1[k] * pred(k)).sum();
    let correction: f64 = a2.iter().map(|&k| data.w1[k] / data.pi2[k] * (data.y[k].unwrap() - pred(k))).sum();
    let cp: Vec<f64> = a2.iter().map(|&k| c[k] / data.pi2[k]).collect();
    Ok(TwoPhaseRegression {
        beta: beta.iter().copied().collect(),
        value: projection + correction,
        projection,
        ibc: super::regression::in_span(&xs, &cp),
    })
}

/// Two-phase estimate of the population total.
pub fn two_phase_estimate(data: &TwoPhaseData, mode: TwoPhaseMode) -> Result<Estimate> {
    data.check()?;
    let a2 = data.second();
    match mode {
        TwoPhaseMode::Dee => {
            let v = a2.iter().map(|&k| data.w1[k] / data.pi2[k] * data.y[k].unwrap()).sum();
            Ok(Estimate::point(v, "two_phase_dee"))
        }
        TwoPhaseMode::Stratified => {
            let st = data.strata.as_ref().ok_or_else(|| Error::Input("phase-one strata are missing".into()))?;
            let h = st.iter().max().map_or(0, |m| m + 1);
            let mut nh = vec![0.0; h];
            let mut num = vec![0.0; h];
            let mut den = vec![0.0; h];
            for k in 0..data.len() {
                nh[st[k]] += data.w1[k];
            }
            for &k in &a2 {
                let w = data.w1[k] / data.pi2[k];
                num[st[k]] += w * data.y[k].unwrap();
                den[st[k]] += w;
            }
            let mut v = 0.0;
            for g in 0..h {
                if nh[g] > 0.0 {
                    if den[g] == 0.0 {
                        return Err(Error::Data(format!("stratum {g} has no phase-two units")));
                    }
                    v += nh[g] * num[g] / den[g];
                }
            }
            Ok(Estimate::point(v, "two_phase_stratified"))
        }
        TwoPhaseMode::Regression => {
            let r = two_phase_regression(data, None)?;
            let mut e = Estimate::point(r.value, "two_phase_regression").diag("projection", r.projection);
            if r.ibc {
                e.flag("ibc");
            }
            Ok(e)
        }
    }
}

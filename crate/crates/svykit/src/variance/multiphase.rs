//! Two-stage and two-phase variance estimators.

use super::{ht_quadratic, HtForm};
use crate::designs::{cluster_frame, joint_for_sample, Design};
use crate::error::{input, Error, Result};
use crate::estimators::{two_phase_estimate, two_phase_regression, Estimate, TwoPhaseData, TwoPhaseMode};
use crate::frame::{Frame, Sample, Selection};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Two-stage HT total `Σ Ŷ_i/π_Ii` with the unbiased variance
/// `Σ_i Σ_j Δ_ij/π_ij · Ŷ_i/π_i · Ŷ_j/π_j + Σ_i V̂_i/π_Ii`.
pub fn two_stage_variance(psu_pi: &[f64], psu_joint: &[Vec<f64>], y_hat: &[f64], v_hat: &[f64]) -> Result<Estimate> {
    let n = psu_pi.len();
    if y_hat.len() != n || v_hat.len() != n {
        return input("PSU totals, variances and probabilities must align");
    }
    let between = ht_quadratic(y_hat, psu_pi, psu_joint, HtForm::Ht)?;
    let within: f64 = v_hat.iter().zip(psu_pi).map(|(v, p)| v / p).sum();
    let total: f64 = y_hat.iter().zip(psu_pi).map(|(y, p)| y / p).sum();
    Ok(Estimate::point(total, "two_stage")
        .with_variance(between + within)
        .diag("between", between)
        .diag("within", within))
}

/// [`two_stage_variance`] for a sample drawn from a top-level two-stage or
/// one-stage cluster design, with joint probabilities from both stages.
pub fn two_stage_variance_design(design: &Design, frame: &Frame, sample: &Sample, y: &[f64]) -> Result<Estimate> {
    let (psu_design, ssu_design) = match design {
        Design::TwoStage { psu, ssu } => (psu.as_ref(), Some(ssu.as_ref())),
        Design::OneStageCluster { psu } => (psu.as_ref(), None),
        _ => return input("two-stage variance needs a two-stage or cluster design"),
    };
    if y.len() != sample.len() {
        return input("y must align with the sample");
    }
    let (cframe, members) = cluster_frame(frame)?;
    let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, s) in sample.selections.iter().enumerate() {
        let p = s.psu.ok_or_else(|| Error::Data("selection without a PSU".into()))?;
        by.entry(p).or_default().push(k);
    }
    let mut psu_sel = Vec::new();
    let mut y_hat = Vec::new();
    let mut v_hat = Vec::new();
    for (&c, ks) in &by {
        let first = &sample.selections[ks[0]];
        let p1 = first.stage1_pi.ok_or_else(|| Error::Data("first-stage probability missing".into()))?;
        psu_sel.push(Selection::new(c, p1));
        let cond: Vec<f64> = ks.iter().map(|&k| sample.selections[k].conditional_pi.unwrap_or(1.0)).collect();
        let ys: Vec<f64> = ks.iter().map(|&k| y[k]).collect();
        y_hat.push(ys.iter().zip(&cond).map(|(y, p)| y / p).sum());
        let v = match ssu_design {
            None => 0.0,
            Some(d) => {
                let sub = frame.subset(&members[c]);
                let local: Vec<Selection> = ks
                    .iter()
                    .map(|&k| {
                        let u = sample.selections[k].unit;
                        let pos = members[c].iter().position(|&m| m == u).unwrap();
                        Selection::new(pos, sample.selections[k].conditional_pi.unwrap_or(1.0))
                    })
                    .collect();
                let ls = Sample::new("ssu", local);
                let j = joint_for_sample(d, &sub, &ls)?;
                ht_quadratic(&ys, &cond, &j, HtForm::Ht)?
            }
        };
        v_hat.push(v);
    }
    let ps = Sample::new("psu", psu_sel);
    let joint = joint_for_sample(psu_design, &cframe, &ps)?;
    two_stage_variance(&ps.pis(), &joint, &y_hat, &v_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoPhaseVariance {
    /// Between- plus within-stratum form for the stratified estimator.
    Stratified,
    /// Linearization on `η̂ = xᵀβ̂₂ + δ/π₂(y − xᵀβ̂₂)` over phase one, plus
    /// the Poisson bias correction when phase two is Poisson.
    RegressionReverse,
    /// Delete-one jackknife over phase one on `X̂₁ᵀβ̂₂` with replicate weights.
    RegressionReplicate,
}

/// Variance of the two-phase estimate of the total. Phase-one joint
/// probabilities (aligned with the phase-one units) give the HT form;
/// without them the with-replacement form `n/(n−1) Σ (w η − mean)²` is used.
pub fn two_phase_variance(data: &TwoPhaseData, mode: TwoPhaseVariance, phase1_joint: Option<&[Vec<f64>]>) -> Result<Estimate> {
    match mode {
        TwoPhaseVariance::Stratified => stratified(data),
        TwoPhaseVariance::RegressionReverse => reverse(data, phase1_joint),
        TwoPhaseVariance::RegressionReplicate => replicate(data),
    }
}

fn stratified(data: &TwoPhaseData) -> Result<Estimate> {
    let point = two_phase_estimate(data, TwoPhaseMode::Stratified)?;
    let st = data.strata.as_ref().ok_or_else(|| Error::Input("phase-one strata are missing".into()))?;
    let h = st.iter().max().map_or(0, |m| m + 1);
    let n_hat: f64 = data.w1.iter().sum();
    let n = data.len() as f64;
    let mut wh = vec![0.0; h];
    for k in 0..data.len() {
        wh[st[k]] += data.w1[k] / n_hat;
    }
    let mut ys: Vec<Vec<(f64, f64)>> = vec![Vec::new(); h];
    for k in data.second() {
        ys[st[k]].push((data.y[k].unwrap(), data.w1[k] / data.pi2[k]));
    }
    let ybar_tp = point.value / n_hat;
    let mut between = 0.0;
    let mut within = 0.0;
    for g in 0..h {
        if wh[g] == 0.0 {
            continue;
        }
        let r = ys[g].len() as f64;
        if r < 2.0 {
            return Err(Error::Data(format!("stratum {g} has fewer than two phase-two units")));
        }
        let sw: f64 = ys[g].iter().map(|(_, w)| w).sum();
        let m = ys[g].iter().map(|(y, w)| y * w).sum::<f64>() / sw;
        let mu = ys[g].iter().map(|(y, _)| y).sum::<f64>() / r;
        let s2 = ys[g].iter().map(|(y, _)| (y - mu).powi(2)).sum::<f64>() / (r - 1.0);
        between += wh[g] * (m - ybar_tp).powi(2) / n;
        within += wh[g] * wh[g] * s2 / r;
    }
    let v = n_hat * n_hat * (between + within);
    let mut e = point.with_variance(v);
    e.diagnostics.insert("between".into(), n_hat * n_hat * between);
    e.diagnostics.insert("within".into(), n_hat * n_hat * within);
    Ok(e)
}

fn reverse(data: &TwoPhaseData, joint: Option<&[Vec<f64>]>) -> Result<Estimate> {
    let reg = two_phase_regression(data, None)?;
    let pred = |k: usize| data.x[k].iter().zip(&reg.beta).map(|(a, b)| a * b).sum::<f64>();
    let eta: Vec<f64> = (0..data.len())
        .map(|k| match data.y[k] {
            Some(y) => pred(k) + (y - pred(k)) / data.pi2[k],
            None => pred(k),
        })
        .collect();
    let pi1: Vec<f64> = data.w1.iter().map(|w| 1.0 / w).collect();
    let mut v = match joint {
        Some(j) => ht_quadratic(&eta, &pi1, j, HtForm::Ht)?,
        None => {
            let n = data.len() as f64;
            if n < 2.0 {
                return input("phase one needs at least two units");
            }
            let z: Vec<f64> = eta.iter().zip(&data.w1).map(|(e, w)| e * w).collect();
            let m = z.iter().sum::<f64>() / n;
            n / (n - 1.0) * z.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        }
    };
    let mut correction = 0.0;
    if data.poisson_phase2 {
        for k in data.second() {
            let e = data.y[k].unwrap() - pred(k);
            let p2 = data.pi2[k];
            correction += data.w1[k] / p2 * (1.0 / p2 - 1.0) * e * e;
        }
        v += correction;
    }
    let mut e = Estimate::point(reg.value, "two_phase_regression/linearized").with_variance(v);
    if data.poisson_phase2 {
        e.flag("poisson_correction");
        e.diagnostics.insert("correction".into(), correction);
    }
    Ok(e)
}

fn replicate(data: &TwoPhaseData) -> Result<Estimate> {
    let reg = two_phase_regression(data, None)?;
    let n = data.len();
    if n < 2 {
        return input("phase one needs at least two units");
    }
    let scale = n as f64 / (n as f64 - 1.0);
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut d = data.clone();
            for (j, w) in d.w1.iter_mut().enumerate() {
                *w = if j == k { 0.0 } else { *w * scale };
            }
            // A deleted phase-two unit keeps y but carries zero weight.
            two_phase_regression(&d, None).map(|r| r.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let m = values.iter().sum::<f64>() / n as f64;
    let v = (n as f64 - 1.0) / n as f64 * values.iter().map(|t| (t - m).powi(2)).sum::<f64>();
    Ok(Estimate::point(reg.value, "two_phase_regression/jackknife").with_variance(v).diag("replicates", n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{draw, enumerate_design, SrsMethod};
    use crate::rng::RngStream;
    use crate::variance::ht_true_variance;

    fn clustered_frame() -> Frame {
        let labels = ["a", "a", "a", "b", "b", "b", "c", "c", "c", "d", "d", "d"];
        Frame::sequential(12)
            .with_clusters(&labels)
            .unwrap()
            .with_y(&[1.0, 3.0, 2.0, 6.0, 5.0, 7.0, 2.0, 2.0, 4.0, 9.0, 8.0, 6.0])
            .unwrap()
    }

    #[test]
    fn two_stage_is_unbiased_by_enumeration() {
        let frame = clustered_frame();
        let design = Design::TwoStage {
            psu: Box::new(Design::Srs { n: 2, method: SrsMethod::default() }),
            ssu: Box::new(Design::Srs { n: 2, method: SrsMethod::default() }),
        };
        let y = frame.y(0).unwrap();
        let dist = enumerate_design(&design, &frame).unwrap();
        let v_true = ht_true_variance(&dist, 12, &y);
        // Rebuild each support point as a sample with stage labels.
        let (_, members) = cluster_frame(&frame).unwrap();
        let mut ev = 0.0;
        for (s, p) in &dist.support {
            let sels: Vec<Selection> = s
                .iter()
                .map(|&u| {
                    let c = members.iter().position(|m| m.contains(&u)).unwrap();
                    let mut t = Selection::new(u, 0.5 * 2.0 / 3.0);
                    t.stage1_pi = Some(0.5);
                    t.conditional_pi = Some(2.0 / 3.0);
                    t.psu = Some(c);
                    t
                })
                .collect();
            let sample = Sample::new("two_stage", sels);
            let e = two_stage_variance_design(&design, &frame, &sample, &sample.gather(&y)).unwrap();
            ev += p * e.variance.unwrap();
        }
        assert!((ev - v_true).abs() < 1e-9 * v_true, "{ev} vs {v_true}");
    }

    #[test]
    fn full_second_stage_has_no_within_term() {
        let frame = clustered_frame();
        let design = Design::OneStageCluster { psu: Box::new(Design::Srs { n: 2, method: SrsMethod::default() }) };
        let mut rng = RngStream::new(3, 0).rng();
        let s = draw(&design, &frame, &mut rng).unwrap();
        let y = s.gather(&frame.y(0).unwrap());
        let e = two_stage_variance_design(&design, &frame, &s, &y).unwrap();
        assert_eq!(e.diagnostics["within"], 0.0);
    }

    fn tp_data() -> TwoPhaseData {
        TwoPhaseData {
            w1: vec![10.0; 8],
            x: (0..8).map(|i| vec![1.0, i as f64]).collect(),
            strata: Some(vec![0, 0, 0, 0, 1, 1, 1, 1]),
            pi2: vec![0.75, 0.75, 0.75, f64::NAN, 0.75, 0.75, f64::NAN, 0.75],
            y: vec![Some(1.0), Some(2.5), Some(2.0), None, Some(6.0), Some(7.5), None, Some(9.0)],
            poisson_phase2: false,
        }
    }

    #[test]
    fn stratified_two_phase_formula() {
        let d = tp_data();
        let e = two_phase_variance(&d, TwoPhaseVariance::Stratified, None).unwrap();
        // w_h = 1/2; ȳ_h2 = 11/6 and 22.5/3; r_h = 3; n = 8.
        let (m0, m1) = (5.5 / 3.0, 22.5 / 3.0);
        let ybar = 0.5 * m0 + 0.5 * m1;
        let s0 = [1.0f64, 2.5, 2.0].iter().map(|y| (y - m0).powi(2)).sum::<f64>() / 2.0;
        let s1 = [6.0f64, 7.5, 9.0].iter().map(|y| (y - m1).powi(2)).sum::<f64>() / 2.0;
        let v = (0.5 * (m0 - ybar).powi(2) + 0.5 * (m1 - ybar).powi(2)) / 8.0 + 0.25 * s0 / 3.0 + 0.25 * s1 / 3.0;
        assert!((e.variance.unwrap() - 6400.0 * v).abs() < 1e-9);
    }

    #[test]
    fn census_phase_two_reverse_equals_phase_one_variance() {
        let mut d = tp_data();
        d.pi2 = vec![1.0; 8];
        d.y = (0..8).map(|i| Some(1.0 + 0.5 * i as f64 + (i % 3) as f64)).collect();
        let e = two_phase_variance(&d, TwoPhaseVariance::RegressionReverse, None).unwrap();
        let z: Vec<f64> = d.y.iter().map(|y| 10.0 * y.unwrap()).collect();
        let m = z.iter().sum::<f64>() / 8.0;
        let v = 8.0 / 7.0 * z.iter().map(|x| (x - m).powi(2)).sum::<f64>();
        assert!((e.variance.unwrap() - v).abs() < 1e-9);
    }

    #[test]
    fn poisson_correction_added() {
        let mut d = tp_data();
        d.poisson_phase2 = true;
        let a = two_phase_variance(&d, TwoPhaseVariance::RegressionReverse, None).unwrap();
        d.poisson_phase2 = false;
        let b = two_phase_variance(&d, TwoPhaseVariance::RegressionReverse, None).unwrap();
        let c = a.diagnostics["correction"];
        assert!(c > 0.0);
        assert!((a.variance.unwrap() - b.variance.unwrap() - c).abs() < 1e-9);
    }

    #[test]
    fn replicate_variant_runs() {
        let d = tp_data();
        let e = two_phase_variance(&d, TwoPhaseVariance::RegressionReplicate, None).unwrap();
        assert!(e.variance.unwrap() > 0.0);
    }
}

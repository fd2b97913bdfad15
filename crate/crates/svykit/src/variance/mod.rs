//! Variance estimation: exact HT forms, the simplified estimator,
//! linearization and replication.

mod multiphase;
mod replication;

pub use multiphase::*;
pub use replication::*;

use crate::designs::{joint_for_sample, Design};
use crate::error::{input, Error, Result};
use crate::estimators::{aligned, regression_fit, Estimate};
use crate::frame::{DesignDistribution, Frame, Sample};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HtForm {
    /// `Σ_i Σ_j (π_ij − π_iπ_j)/π_ij · y_i/π_i · y_j/π_j`.
    Ht,
    /// Sen-Yates-Grundy, for fixed-size designs.
    Syg,
}

/// HT-type quadratic form of `y` given first-order and joint probabilities
/// of the sampled units, in sample order.
pub fn ht_quadratic(y: &[f64], pi: &[f64], joint: &[Vec<f64>], form: HtForm) -> Result<f64> {
    let n = y.len();
    if pi.len() != n || joint.len() != n || joint.iter().any(|r| r.len() != n) {
        return input("joint probabilities must be an n×n matrix over the sample");
    }
    for i in 0..n {
        for j in 0..n {
            if !(joint[i][j] > 0.0) {
                return Err(Error::Data(format!(
                    "joint inclusion probability of sampled units {i} and {j} is zero: design is not measurable"
                )));
            }
        }
    }
    let z: Vec<f64> = y.iter().zip(pi).map(|(y, p)| y / p).collect();
    let mut v = 0.0;
    match form {
        HtForm::Ht => {
            for i in 0..n {
                for j in 0..n {
                    let pij = if i == j { pi[i] } else { joint[i][j] };
                    v += (pij - pi[i] * pi[j]) / pij * z[i] * z[j];
                }
            }
        }
        HtForm::Syg => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let pij = joint[i][j];
                    v += (pi[i] * pi[j] - pij) / pij * (z[i] - z[j]).powi(2);
                }
            }
        }
    }
    Ok(v)
}

/// HT total with its HT or SYG variance estimate.
pub fn ht_variance_est(sample: &Sample, y: &[f64], joint: &[Vec<f64>], form: HtForm) -> Result<Estimate> {
    aligned(sample, y, "y")?;
    if sample.with_replacement {
        return input("HT variance needs a without-replacement sample; use hh_variance");
    }
    let pi = sample.pis();
    let v = ht_quadratic(y, &pi, joint, form)?;
    let total: f64 = y.iter().zip(&pi).map(|(y, p)| y / p).sum();
    let tag = match form {
        HtForm::Ht => "ht",
        HtForm::Syg => "syg",
    };
    let mut e = Estimate::point(total, "ht_total").with_variance(v);
    e.method = format!("ht_total/{tag}");
    if form == HtForm::Syg {
        let n = y.len();
        let all_neg = (0..n).all(|i| (0..n).all(|j| i == j || joint[i][j] < pi[i] * pi[j]));
        if all_neg {
            e.flag("syg_nonnegative");
        }
    }
    Ok(e)
}

/// Does every sample of the design have the same size?
pub fn fixed_size(design: &Design, frame: &Frame) -> bool {
    match design {
        Design::Srs { .. }
        | Design::SystematicPips { .. }
        | Design::Brewer2 {}
        | Design::Durbin2 {}
        | Design::Chao { .. }
        | Design::RejectivePoisson { .. } => true,
        Design::Systematic { n } => *n > 0 && frame.len().is_multiple_of(*n),
        Design::Stratified { strata } => match frame.strata() {
            Ok(groups) => groups.iter().all(|(label, members)| {
                strata.get(label).is_some_and(|d| fixed_size(d, &frame.subset(members)))
            }),
            Err(_) => false,
        },
        Design::Explicit { support } => support.windows(2).all(|w| w[0].0.len() == w[1].0.len()),
        _ => false,
    }
}

/// [`ht_variance_est`] with the joint probabilities taken from the design.
pub fn ht_variance_design(design: &Design, frame: &Frame, sample: &Sample, y: &[f64], form: HtForm) -> Result<Estimate> {
    if form == HtForm::Syg && !fixed_size(design, frame) {
        return input("the SYG form requires a fixed-size design");
    }
    let joint = joint_for_sample(design, frame, sample)?;
    ht_variance_est(sample, y, &joint, form)
}

/// Exact design variance of the HT total of a frame column.
pub fn ht_true_variance(dist: &DesignDistribution, n_units: usize, y: &[f64]) -> f64 {
    let pi = dist.first_order(n_units);
    dist.moments(|s| s.iter().map(|&i| y[i] / pi[i]).sum()).1
}

/// Stratum and PSU of every selection: units without a PSU are their own.
pub(crate) fn psu_keys(sample: &Sample) -> Vec<(usize, usize)> {
    sample
        .selections
        .iter()
        .enumerate()
        .map(|(k, s)| (s.stratum.unwrap_or(0), s.psu.map_or(k + (1 << 40), |p| p)))
        .collect()
}

/// `Σ_h n_h/(n_h−1) Σ_i (t_hi − t̄_h)²` over PSU totals `t_hi` of the
/// per-unit contributions.
pub fn simplified_from_contributions(contrib: &[f64], keys: &[(usize, usize)]) -> Result<f64> {
    let mut by: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
    for (c, (h, p)) in contrib.iter().zip(keys) {
        *by.entry(*h).or_default().entry(*p).or_default() += c;
    }
    let mut v = 0.0;
    for (h, psus) in by {
        let n = psus.len();
        if n < 2 {
            return Err(Error::Data(format!("stratum {h} has a single PSU")));
        }
        let t: Vec<f64> = psus.into_values().collect();
        let mean = t.iter().sum::<f64>() / n as f64;
        v += n as f64 / (n as f64 - 1.0) * t.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    }
    Ok(v)
}

/// Simplified (with-replacement) variance of the HT total, stratified and
/// multistage through the sample's stratum and PSU labels.
pub fn simplified_variance(sample: &Sample, y: &[f64]) -> Result<Estimate> {
    aligned(sample, y, "y")?;
    let contrib: Vec<f64> = sample.weights().iter().zip(y).map(|(w, y)| w * y).collect();
    let v = simplified_from_contributions(&contrib, &psu_keys(sample))?;
    Ok(Estimate::point(contrib.iter().sum(), "ht_total/simplified").with_variance(v))
}

/// Hansen-Hurwitz total with `n⁻¹(n−1)⁻¹ Σ (z_k − z̄)²` over draws.
pub fn hh_variance(sample: &Sample, y: &[f64]) -> Result<Estimate> {
    aligned(sample, y, "y")?;
    if !sample.with_replacement {
        return input("Hansen-Hurwitz variance needs a with-replacement sample");
    }
    let mut z = Vec::new();
    for (s, y) in sample.selections.iter().zip(y) {
        let p = s.draw_prob.ok_or_else(|| Error::Data("draw probabilities missing".into()))?;
        for _ in 0..s.multiplicity {
            z.push(y / p);
        }
    }
    let n = z.len();
    if n < 2 {
        return input("Hansen-Hurwitz variance needs at least two draws");
    }
    let mean = z.iter().sum::<f64>() / n as f64;
    let ss: f64 = z.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(Estimate::point(mean, "hh_total").with_variance(ss / (n as f64 * (n as f64 - 1.0))))
}

/// Residual transformation for linearization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Residuals {
    /// `e = y − R̂x` for the ratio estimator `X R̂` of the total.
    Ratio { x: Vec<f64>, x_total: f64 },
    /// `e = y − xᵀβ̂` for the GREG total.
    Regression { x: Vec<Vec<f64>>, x_totals: Vec<f64>, c: Option<Vec<f64>> },
    /// `g_i e_i`, the conditional form for the GREG total.
    GregG { x: Vec<Vec<f64>>, x_totals: Vec<f64>, c: Option<Vec<f64>> },
    /// `δ (y − Ȳ_d)/N̂_d` for a domain mean.
    Domain { in_domain: Vec<bool> },
    /// `(y − Ȳ)/N̂` for the Hájek mean.
    Hajek,
}

/// How the linearized values are turned into a variance.
#[derive(Debug, Clone, PartialEq)]
pub enum Engine {
    Ht(Vec<Vec<f64>>),
    Syg(Vec<Vec<f64>>),
    Simplified,
}

/// Estimated variance of `Σ w_i q_i` under the chosen engine.
pub fn engine_variance(sample: &Sample, q: &[f64], engine: &Engine) -> Result<f64> {
    aligned(sample, q, "values")?;
    match engine {
        Engine::Ht(j) => ht_quadratic(q, &sample.pis(), j, HtForm::Ht),
        Engine::Syg(j) => ht_quadratic(q, &sample.pis(), j, HtForm::Syg),
        Engine::Simplified => {
            let contrib: Vec<f64> = sample.weights().iter().zip(q).map(|(w, e)| w * e).collect();
            simplified_from_contributions(&contrib, &psu_keys(sample))
        }
    }
}

/// Point estimate and linearized values `e_i` with `Σ w_i e_i` as the
/// linear approximation of the estimator's error.
pub fn linearize(sample: &Sample, y: &[f64], spec: &Residuals) -> Result<(f64, Vec<f64>, &'static str)> {
    aligned(sample, y, "y")?;
    let w = sample.weights();
    let n = y.len();
    let wsum = |v: &[f64]| -> f64 { w.iter().zip(v).map(|(a, b)| a * b).sum() };
    Ok(match spec {
        Residuals::Ratio { x, x_total } => {
            aligned(sample, x, "x")?;
            let xh = wsum(x);
            if xh == 0.0 {
                return Err(Error::Numerical("HT estimate of the x total is zero".into()));
            }
            let r = wsum(y) / xh;
            (x_total * r, y.iter().zip(x).map(|(y, x)| y - r * x).collect(), "ratio")
        }
        Residuals::Regression { x, x_totals, c } | Residuals::GregG { x, x_totals, c } => {
            let ones = vec![1.0; n];
            let c = c.as_deref().unwrap_or(&ones);
            let fit = regression_fit(&w, y, x, x_totals, c, false)?;
            let value: f64 = fit.weights.iter().zip(y).map(|(a, b)| a * b).sum();
            let e = if matches!(spec, Residuals::GregG { .. }) {
                fit.residuals.iter().zip(&fit.g_weights).map(|(e, g)| e * g).collect()
            } else {
                fit.residuals.clone()
            };
            (value, e, if matches!(spec, Residuals::GregG { .. }) { "greg_g" } else { "regression" })
        }
        Residuals::Domain { in_domain } => {
            if in_domain.len() != n {
                return input("domain indicator length differs from y");
            }
            let nd: f64 = (0..n).filter(|&k| in_domain[k]).map(|k| w[k]).sum();
            if nd == 0.0 {
                return Err(Error::Data("no eligible units in the domain".into()));
            }
            let m = (0..n).filter(|&k| in_domain[k]).map(|k| w[k] * y[k]).sum::<f64>() / nd;
            let e = (0..n).map(|k| if in_domain[k] { (y[k] - m) / nd } else { 0.0 }).collect();
            (m, e, "domain_mean")
        }
        Residuals::Hajek => {
            let nh: f64 = w.iter().sum();
            let m = wsum(y) / nh;
            (m, y.iter().map(|y| (y - m) / nh).collect(), "hajek_mean")
        }
    })
}

/// Linearization variance: the residuals go through the chosen engine.
pub fn linearized_variance(sample: &Sample, y: &[f64], spec: &Residuals, engine: &Engine) -> Result<Estimate> {
    let (value, e, tag) = linearize(sample, y, spec)?;
    let v = engine_variance(sample, &e, engine)?;
    let mut est = Estimate::point(value, format!("{tag}/linearized")).with_variance(v);
    est.n_effective = Some(sample.len() as f64);
    Ok(est)
}

/// Conditional variance of the post-stratified total under SRS:
/// `(1 − n/N) n/(n−1) Σ_g N_g²/n_g · (n_g−1)/n_g · s_g²`.
pub fn poststrat_conditional_variance(pop_size: f64, pop_counts: &[f64], y: &[f64], groups: &[usize]) -> Result<f64> {
    if y.len() != groups.len() {
        return input("groups must align with y");
    }
    let n = y.len() as f64;
    let g = pop_counts.len();
    let mut cnt = vec![0.0; g];
    let mut sum = vec![0.0; g];
    for (y, &k) in y.iter().zip(groups) {
        if k >= g {
            return input(format!("group {k} has no population count"));
        }
        cnt[k] += 1.0;
        sum[k] += y;
    }
    let mut ss = vec![0.0; g];
    for (y, &k) in y.iter().zip(groups) {
        ss[k] += (y - sum[k] / cnt[k]).powi(2);
    }
    let mut acc = 0.0;
    for k in 0..g {
        if cnt[k] == 0.0 {
            return Err(Error::Data(format!("post-stratum {k} is empty in the sample")));
        }
        if cnt[k] < 2.0 {
            continue;
        }
        let s2 = ss[k] / (cnt[k] - 1.0);
        acc += pop_counts[k].powi(2) / cnt[k] * (cnt[k] - 1.0) / cnt[k] * s2;
    }
    Ok((1.0 - n / pop_size) * n / (n - 1.0) * acc)
}

/// `θ̄` with `G⁻¹(G−1)⁻¹ Σ (θ̂_k − θ̄)²`.
pub fn random_group_variance(thetas: &[f64]) -> Result<Estimate> {
    let g = thetas.len();
    if g < 2 {
        return input("random groups need at least two replicates");
    }
    let m = thetas.iter().sum::<f64>() / g as f64;
    let ss: f64 = thetas.iter().map(|t| (t - m).powi(2)).sum();
    Ok(Estimate::point(m, "random_group").with_variance(ss / (g as f64 * (g as f64 - 1.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{enumerate_design, joint_pips};
    use crate::frame::Selection;

    fn ex101() -> (DesignDistribution, Vec<f64>) {
        let d = DesignDistribution::new(
            vec![(vec![0, 1], 0.4), (vec![0, 2], 0.3), (vec![1, 2], 0.2), (vec![0, 1, 2], 0.1)],
            3,
        )
        .unwrap();
        (d, vec![16.0, 21.0, 18.0])
    }

    #[test]
    fn example_ht_variance_table() {
        let (d, y) = ex101();
        let pi = d.first_order(3);
        assert!((pi[0] - 0.8).abs() < 1e-12 && (pi[1] - 0.7).abs() < 1e-12 && (pi[2] - 0.6).abs() < 1e-12);
        let joint = d.joint(3);
        let want = [(vec![0, 1], 50.0, 206.0), (vec![0, 2], 50.0, 200.0), (vec![1, 2], 60.0, -90.0), (vec![0, 1, 2], 80.0, -394.0)];
        let mut ev = 0.0;
        for (s, t, v) in want {
            let p = d.support.iter().find(|(a, _)| *a == s).unwrap().1;
            let s = &s;
            let sample = Sample::from_units("explicit", s, &pi);
            let j: Vec<Vec<f64>> = s.iter().map(|&a| s.iter().map(|&b| joint[a][b]).collect()).collect();
            let e = ht_variance_est(&sample, &sample.gather(&y), &j, HtForm::Ht).unwrap();
            assert!((e.value - t).abs() < 1e-9);
            assert!((e.variance.unwrap() - v).abs() < 1e-9, "{s:?}: {:?}", e.variance);
            ev += p * e.variance.unwrap();
        }
        assert!((ev - 85.0).abs() < 1e-9);
        assert!((ht_true_variance(&d, 3, &y) - 85.0).abs() < 1e-9);
    }

    #[test]
    fn negative_estimates_are_flagged() {
        let (d, y) = ex101();
        let pi = d.first_order(3);
        let joint = d.joint(3);
        let s = vec![1, 2];
        let sample = Sample::from_units("explicit", &s, &pi);
        let j: Vec<Vec<f64>> = s.iter().map(|&a| s.iter().map(|&b| joint[a][b]).collect()).collect();
        let e = ht_variance_est(&sample, &sample.gather(&y), &j, HtForm::Ht).unwrap();
        assert!(e.flags.contains(&"negative_variance".to_string()));
        assert!(e.se.is_none());
    }

    #[test]
    fn srs_forms_agree_with_closed_form() {
        let frame = Frame::sequential(7);
        let design = Design::Srs { n: 3, method: Default::default() };
        let y = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0];
        let sample = Sample::from_units("srs", &[1, 4, 5], &[3.0 / 7.0; 7]);
        let ys = sample.gather(&y);
        let m = ys.iter().sum::<f64>() / 3.0;
        let s2 = ys.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 2.0;
        let want = 49.0 / 3.0 * (4.0 / 7.0) * s2;
        for f in [HtForm::Ht, HtForm::Syg] {
            let e = ht_variance_design(&design, &frame, &sample, &ys, f).unwrap();
            assert!((e.variance.unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn syg_rejects_random_size() {
        let frame = Frame::sequential(5);
        let sample = Sample::from_units("bernoulli", &[0, 2], &[0.5; 5]);
        let e = ht_variance_design(&Design::Bernoulli { pi: 0.5 }, &frame, &sample, &[1.0, 2.0], HtForm::Syg);
        assert!(matches!(e, Err(Error::Input(_))));
    }

    #[test]
    fn syg_zero_for_constant_ratio() {
        let frame = Frame::from_mos(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let design = Design::Brewer2 {};
        let jp = joint_pips(&design, &frame).unwrap();
        let sample = Sample::from_units("brewer2", &[1, 3], &jp.first_order);
        let y = [2.0 * jp.first_order[1], 2.0 * jp.first_order[3]];
        let e = ht_variance_design(&design, &frame, &sample, &y, HtForm::Syg).unwrap();
        assert!(e.variance.unwrap().abs() < 1e-12);
    }

    #[test]
    fn systematic_is_not_measurable() {
        let frame = Frame::sequential(6);
        let design = Design::Systematic { n: 2 };
        let pi = vec![0.5; 6];
        let sample = Sample::from_units("systematic", &[0, 3], &pi);
        let e = ht_variance_design(&design, &frame, &sample, &[1.0, 2.0], HtForm::Ht);
        assert!(e.is_ok());
        // A pair never drawn together.
        let j = vec![vec![0.5, 0.0], vec![0.0, 0.5]];
        let s2 = Sample::from_units("x", &[0, 1], &pi);
        assert!(matches!(ht_variance_est(&s2, &[1.0, 2.0], &j, HtForm::Ht), Err(Error::Data(_))));
    }

    #[test]
    fn simplified_srs_relative_bias() {
        // E(V̂0) − V = V · n/(N−n) under SRS.
        let frame = Frame::sequential(6);
        let design = Design::Srs { n: 3, method: Default::default() };
        let dist = enumerate_design(&design, &frame).unwrap();
        let y = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0];
        let pi = dist.first_order(6);
        let v = ht_true_variance(&dist, 6, &y);
        let (ev, _) = dist.moments(|s| {
            let sample = Sample::from_units("srs", s, &pi);
            simplified_variance(&sample, &sample.gather(&y)).unwrap().variance.unwrap()
        });
        assert!(((ev - v) / v - 3.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn simplified_constant_ratio_is_zero() {
        let pi = [0.2, 0.4, 0.5];
        let sample = Sample::from_units("x", &[0, 1, 2], &pi);
        let y: Vec<f64> = pi.iter().map(|p| 3.0 * p).collect();
        assert!(simplified_variance(&sample, &y).unwrap().variance.unwrap().abs() < 1e-12);
    }

    #[test]
    fn hh_business_frame_expectation() {
        // Two PPS draws with p ∝ MOS; the estimator is unbiased for V = σ²/2.
        let mos = [100.0, 200.0, 300.0, 1000.0];
        let y = [11.0, 20.0, 24.0, 245.0];
        let p: Vec<f64> = mos.iter().map(|m| m / 1600.0).collect();
        let mut ev = 0.0;
        let mut e_mean = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let prob = p[a] * p[b];
                let sels = if a == b {
                    let mut s = Selection::new(a, 2.0 * p[a]);
                    s.multiplicity = 2;
                    s.draw_prob = Some(p[a]);
                    vec![s]
                } else {
                    [a, b]
                        .iter()
                        .map(|&u| {
                            let mut s = Selection::new(u, 2.0 * p[u]);
                            s.draw_prob = Some(p[u]);
                            s
                        })
                        .collect()
                };
                let mut sample = Sample::new("pps_wr", sels);
                sample.with_replacement = true;
                let e = hh_variance(&sample, &sample.gather(&y)).unwrap();
                ev += prob * e.variance.unwrap();
                e_mean += prob * e.value;
            }
        }
        assert!((e_mean - 300.0).abs() < 1e-9);
        assert!((ev - 7124.0).abs() < 1e-9, "{ev}");
    }

    #[test]
    fn hh_needs_two_draws() {
        let mut s = Selection::new(0, 0.5);
        s.draw_prob = Some(0.5);
        let mut sample = Sample::new("pps_wr", vec![s]);
        sample.with_replacement = true;
        assert!(hh_variance(&sample, &[1.0]).is_err());
    }

    #[test]
    fn ratio_residuals_vanish_for_proportional_y() {
        let pi = [0.3, 0.5, 0.2, 0.4];
        let sample = Sample::from_units("x", &[0, 1, 2, 3], &pi);
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|x| 2.5 * x).collect();
        let e = linearized_variance(&sample, &y, &Residuals::Ratio { x, x_total: 30.0 }, &Engine::Simplified).unwrap();
        assert!(e.variance.unwrap().abs() < 1e-12);
        assert!((e.value - 75.0).abs() < 1e-12);
    }

    #[test]
    fn poststrat_conditional_matches_greg_g_form() {
        let y = [3.0, 5.0, 4.0, 10.0, 12.0, 11.0, 15.0];
        let groups = [0, 0, 0, 1, 1, 1, 1];
        let counts = [30.0, 40.0];
        let v = poststrat_conditional_variance(70.0, &counts, &y, &groups).unwrap();
        let s0 = 1.0; // var of 3,5,4
        let s1 = ((10.0f64 - 12.0).powi(2) + 0.0 + 1.0 + 9.0) / 3.0;
        let want = (1.0 - 7.0 / 70.0) * 7.0 / 6.0 * (900.0 / 3.0 * 2.0 / 3.0 * s0 + 1600.0 / 4.0 * 3.0 / 4.0 * s1);
        assert!((v - want).abs() < 1e-9);
        // The same number from linearization with g-weighted residuals.
        let n = 7.0;
        let pi = vec![n / 70.0; 7];
        let sample = Sample::from_units("srs", &(0..7).collect::<Vec<_>>(), &pi);
        let x: Vec<Vec<f64>> = groups.iter().map(|&g| if g == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect();
        let f = n / 70.0;
        let joint: Vec<Vec<f64>> = (0..7)
            .map(|i| (0..7).map(|j| if i == j { f } else { n * (n - 1.0) / (70.0 * 69.0) }).collect())
            .collect();
        let e = linearized_variance(&sample, &y, &Residuals::GregG { x, x_totals: counts.to_vec(), c: None }, &Engine::Ht(joint)).unwrap();
        assert!((e.variance.unwrap() - v).abs() < 1e-9 * v);
    }

    #[test]
    fn random_groups() {
        let e = random_group_variance(&[4.0, 4.0, 4.0]).unwrap();
        assert_eq!(e.variance, Some(0.0));
        let e = random_group_variance(&[3.0, 7.0]).unwrap();
        assert!((e.variance.unwrap() - 16.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn hajek_and_domain_linearization() {
        let pi = [0.5; 4];
        let sample = Sample::from_units("x", &[0, 1, 2, 3], &pi);
        let y = [1.0, 2.0, 3.0, 6.0];
        let e = linearized_variance(&sample, &y, &Residuals::Hajek, &Engine::Simplified).unwrap();
        assert!((e.value - 3.0).abs() < 1e-12);
        // Simplified on (y − ȳ)/N̂ with weight 2: n/(n−1) Σ (2e)² = 4/3·Σ(y−ȳ)²/16.
        let want = 4.0 / 3.0 * (4.0 + 1.0 + 0.0 + 9.0) / 16.0;
        assert!((e.variance.unwrap() - want).abs() < 1e-12);
        let d = linearized_variance(&sample, &y, &Residuals::Domain { in_domain: vec![true; 4] }, &Engine::Simplified).unwrap();
        assert!((d.variance.unwrap() - want).abs() < 1e-12);
    }
}

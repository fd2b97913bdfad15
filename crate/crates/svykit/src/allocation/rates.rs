//! Closed-form optimal rates from cost-variance products.

use crate::error::{input, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampleSize {
    pub m: f64,
    /// Set when S_b² ≤ S_w²: the variance-cost product falls in m, so take whole clusters.
    pub one_stage: bool,
}

/// Optimal within-cluster subsample size for equal cluster sizes `M` under
/// cost `c0 + c1 n_I + c2 n_I m`.
pub fn cluster_subsample_size(c1: f64, c2: f64, sb2: f64, sw2: f64, m_size: f64) -> Result<SubsampleSize> {
    if !(c1 > 0.0 && c2 > 0.0 && sw2 >= 0.0 && m_size >= 1.0) {
        return input("costs must be positive, S_w² nonnegative and M ≥ 1");
    }
    if sb2 <= sw2 {
        return Ok(SubsampleSize { m: m_size, one_stage: true });
    }
    let m = (c1 / c2 * m_size * sw2 / (sb2 - sw2)).sqrt();
    if m >= m_size {
        return Ok(SubsampleSize { m: m_size, one_stage: true });
    }
    Ok(SubsampleSize { m, one_stage: false })
}

/// Large-cluster approximation `√(c1/c2 · (1/ρ − 1))`.
pub fn cluster_subsample_size_icc(c1: f64, c2: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return input(format!("rho = {rho} must lie in (0,1]"));
    }
    Ok((c1 / c2 * (1.0 / rho - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseStratRates {
    /// Second-phase sampling rates ν_h = r_h / n_h.
    pub nu: Vec<f64>,
    /// Expected r_h / n for each stratum.
    pub r_over_n: Vec<f64>,
    /// Rates above one, clamped to one.
    pub clamped: Vec<usize>,
}

/// Two-phase sampling for stratification with cost `c1 n + Σ c2h r_h`.
pub fn two_phase_strat_rates(c1: f64, c2: &[f64], w: &[f64], s2_h: &[f64], s2: f64) -> Result<TwoPhaseStratRates> {
    if c2.len() != w.len() || w.len() != s2_h.len() || w.is_empty() {
        return input("c2, W and S_h² must have one entry per stratum");
    }
    let within: f64 = w.iter().zip(s2_h).map(|(w, s)| w * s).sum();
    if s2 <= within {
        return input("S² does not exceed Σ W_h S_h²; stratification gains nothing");
    }
    let mut nu = Vec::with_capacity(w.len());
    let mut clamped = Vec::new();
    for h in 0..w.len() {
        let v = (c1 / c2[h] * s2_h[h] / (s2 - within)).sqrt();
        if v > 1.0 {
            clamped.push(h);
        }
        nu.push(v.min(1.0));
    }
    let r_over_n = nu.iter().zip(w).map(|(v, w)| v * w).collect();
    Ok(TwoPhaseStratRates { nu, r_over_n, clamped })
}

/// Homogeneous case: `r/n = √(c1/c2 · 1/(φ − 1))` with `φ = S²/S_w²`.
pub fn two_phase_ratio_homogeneous(c1: f64, c2: f64, phi: f64) -> Result<f64> {
    if phi <= 1.0 {
        return input(format!("phi = {phi} must exceed 1"));
    }
    Ok((c1 / c2 / (phi - 1.0)).sqrt())
}

/// Variance of the two-phase stratified mean (without fpc) and its cost, per
/// unit phase-one size: used to probe local optimality.
pub fn two_phase_strat_objective(c1: f64, c2: &[f64], w: &[f64], s2_h: &[f64], s2: f64, nu: &[f64]) -> f64 {
    let within: f64 = w.iter().zip(s2_h).map(|(w, s)| w * s).sum();
    let v = (s2 - within) + w.iter().zip(s2_h).zip(nu).map(|((w, s), v)| w * s / v).sum::<f64>();
    let c = c1 + c2.iter().zip(w).zip(nu).map(|((c, w), v)| c * w * v).sum::<f64>();
    v * c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseRegRate {
    pub nu: f64,
    /// Continuous phase-one size from the budget.
    pub n: f64,
    /// Continuous phase-two size `ν n`.
    pub r: f64,
    /// `BᵀS_xxB/n + S_ee/r`, ignoring the fpc.
    pub variance: f64,
    /// Budget a single-phase survey of y needs to reach the same variance.
    pub direct_cost: f64,
    /// ν* exceeded one and was clamped.
    pub clamped: bool,
}

/// Optimal phase-two rate for the two-phase regression estimator under cost
/// `c0 + c1 n + c2 r`.
pub fn two_phase_reg_rate(c1: f64, c2: f64, s_ee: f64, bsb: f64, budget: f64, c0: f64) -> Result<TwoPhaseRegRate> {
    if !(c1 > 0.0 && c2 > 0.0 && s_ee >= 0.0) {
        return input("costs must be positive and S_ee nonnegative");
    }
    if !(bsb > 0.0) {
        return input("BᵀS_xxB must be positive; without a regression gain spend the budget on y");
    }
    if budget < c0 + c1 + c2 {
        return input("budget cannot buy one unit in each phase");
    }
    let raw = (c1 / c2 * s_ee / bsb).sqrt();
    let nu = raw.min(1.0);
    let n = (budget - c0) / (c1 + c2 * nu);
    let r = nu * n;
    let variance = bsb / n + s_ee / r;
    let direct_cost = c2 * (bsb + s_ee) / variance + c0;
    Ok(TwoPhaseRegRate { nu, n, r, variance, direct_cost, clamped: raw > 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatedSurveySplit {
    /// Unmatched fraction n_u / n.
    pub unmatched: f64,
    /// Matched fraction n_m / n.
    pub matched: f64,
    /// Minimum variance as a multiple of S²/n.
    pub variance_factor: f64,
}

pub fn repeated_survey_fractions(rho: f64) -> Result<RepeatedSurveySplit> {
    if !(rho.abs() <= 1.0) {
        return input(format!("|rho| = {} exceeds 1", rho.abs()));
    }
    let root = (1.0 - rho * rho).sqrt();
    let unmatched = 1.0 / (1.0 + root);
    Ok(RepeatedSurveySplit { unmatched, matched: 1.0 - unmatched, variance_factor: (1.0 + root) / 2.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallbackRate {
    pub nu: f64,
    pub clamped: bool,
}

/// Optimal callback subsampling rate for nonrespondents.
pub fn callback_rate(c0: f64, c1: f64, w1: f64, c2: f64, s2: f64, w2: f64, s2_2: f64) -> Result<CallbackRate> {
    if !(c2 > 0.0) {
        return input("callback cost must be positive");
    }
    if s2 <= w2 * s2_2 {
        return input("S² must exceed W_2 S_2²");
    }
    let raw = ((c0 + c1 * w1) / c2 * s2_2 / (s2 - w2 * s2_2)).sqrt();
    Ok(CallbackRate { nu: raw.min(1.0), clamped: raw > 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsample_examples() {
        assert!((cluster_subsample_size_icc(1.0, 1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((cluster_subsample_size_icc(10.0, 1.0, 0.1).unwrap() - 90f64.sqrt()).abs() < 1e-12);
        let (c1, c2, sb2, sw2, m) = (20.0, 2.0, 9.0, 4.0, 50.0);
        let s = cluster_subsample_size(c1, c2, sb2, sw2, m).unwrap();
        assert!(!s.one_stage);
        assert!((s.m * s.m * (sb2 - sw2) / m - c1 / c2 * sw2).abs() < 1e-9);
        assert!(cluster_subsample_size(1.0, 1.0, 1.0, 2.0, 10.0).unwrap().one_stage);
    }

    #[test]
    fn subsample_minimizes_cost_product() {
        let (c1, c2, sb2, sw2, m) = (30.0, 2.0, 6.0, 4.0, 200.0);
        let f = |k: f64| ((sb2 - sw2) / m + sw2 / k) * (c1 + c2 * k);
        let s = cluster_subsample_size(c1, c2, sb2, sw2, m).unwrap().m;
        for d in [0.95, 1.05] {
            assert!(f(s * d) >= f(s));
        }
    }

    #[test]
    fn two_phase_homogeneous() {
        let r = two_phase_ratio_homogeneous(1.0, 10.0, 2.0).unwrap();
        assert!((r - 0.1f64.sqrt()).abs() < 1e-12);
        assert!(two_phase_ratio_homogeneous(1.0, 10.0, 1.0).is_err());
        assert!(two_phase_ratio_homogeneous(1.0, 10.0, 1e12).unwrap() < 1e-5);
    }

    #[test]
    fn two_phase_general_matches_homogeneous() {
        let w = [0.3, 0.7];
        let r = two_phase_strat_rates(1.0, &[10.0, 10.0], &w, &[1.0, 1.0], 2.0).unwrap();
        let total: f64 = r.r_over_n.iter().sum();
        assert!((total - 0.1f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_phase_rates_locally_optimal() {
        let (c1, c2, w, s2h, s2) = (1.0, [4.0, 9.0, 16.0], [0.2, 0.5, 0.3], [2.0, 1.0, 3.0], 6.0);
        let r = two_phase_strat_rates(c1, &c2, &w, &s2h, s2).unwrap();
        let base = two_phase_strat_objective(c1, &c2, &w, &s2h, s2, &r.nu);
        for h in 0..3 {
            for d in [0.95, 1.05] {
                let mut nu = r.nu.clone();
                nu[h] *= d;
                let v = two_phase_strat_objective(c1, &c2, &w, &s2h, s2, &nu);
                assert!(v >= base * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn regression_cost_example() {
        let rho: f64 = 0.8;
        let r = two_phase_reg_rate(1.0, 10.0, 1.0 - rho * rho, rho * rho, 1000.0, 0.0).unwrap();
        assert!((r.nu - 0.23717).abs() < 1e-4);
        assert!((r.variance - 7.28e-3).abs() < 2e-5);
        assert!((r.direct_cost - 1374.0).abs() < 1.0);
        assert!(two_phase_reg_rate(1.0, 10.0, 1.0, 0.0, 1000.0, 0.0).is_err());
        assert!(two_phase_reg_rate(1.0, 10.0, 1.0, 1.0, 5.0, 0.0).is_err());
    }

    #[test]
    fn repeated_survey() {
        let r = repeated_survey_fractions(0.0).unwrap();
        assert_eq!((r.unmatched, r.matched, r.variance_factor), (0.5, 0.5, 1.0));
        let r = repeated_survey_fractions(1.0).unwrap();
        assert_eq!((r.unmatched, r.variance_factor), (1.0, 0.5));
        assert!((repeated_survey_fractions(0.6).unwrap().variance_factor - 0.9).abs() < 1e-15);
        assert!(repeated_survey_fractions(1.5).is_err());
    }

    #[test]
    fn callback() {
        let r = callback_rate(1.0, 0.0, 0.5, 1.0, 1.0, 0.5, 1.0).unwrap();
        assert!(r.clamped);
        assert_eq!(r.nu, 1.0);
        assert!(callback_rate(1.0, 1.0, 0.5, 1e12, 1.0, 0.5, 1.0).unwrap().nu < 1e-5);
        // Same answer as the two-phase stratification rate for the callback stratum.
        let a = callback_rate(2.0, 3.0, 0.6, 40.0, 5.0, 0.4, 2.0).unwrap().nu;
        let b = two_phase_strat_rates(2.0 + 3.0 * 0.6, &[1.0, 40.0], &[0.6, 0.4], &[0.0, 2.0], 5.0).unwrap().nu[1];
        assert!((a - b).abs() < 1e-14);
    }
}

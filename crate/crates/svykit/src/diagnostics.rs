//! Cluster ANOVA, intraclass correlation, design effects and sample sizes.

use crate::error::{input, Result};
use crate::estimators::Estimate;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// One-way ANOVA of a clustered population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaSummary {
    pub n_units: usize,
    pub n_clusters: usize,
    pub sst: f64,
    pub ssb: f64,
    pub ssw: f64,
    pub df_total: usize,
    pub df_between: usize,
    pub df_within: usize,
    /// SSB/(N_I − 1)
    pub s2_between: f64,
    /// SSW/(N − N_I)
    pub s2_within: f64,
    /// SST/(N − 1)
    pub s2: f64,
    pub mean: f64,
    pub m_bar: f64,
    /// Intraclass correlation 1 − M/(M−1)·SSW/SST, using M̄ when sizes differ.
    pub rho: f64,
    /// Cluster homogeneity 1 − S_w²/S².
    pub delta: f64,
    /// (N_I − 1)⁻¹ Σ (M_i − M̄) M_i Ȳ_i²
    pub c_star: f64,
    pub equal_sizes: bool,
}

pub fn anova(clusters: &[Vec<f64>]) -> Result<AnovaSummary> {
    let ni = clusters.len();
    if ni < 2 {
        return input("anova needs at least two clusters");
    }
    if clusters.iter().any(|c| c.is_empty()) {
        return input("every cluster needs at least one unit");
    }
    let n: usize = clusters.iter().map(|c| c.len()).sum();
    if n <= ni {
        return input("anova needs some cluster with more than one unit");
    }
    let total: f64 = clusters.iter().flatten().sum();
    let mean = total / n as f64;
    let m_bar = n as f64 / ni as f64;
    let (mut sst, mut ssb, mut ssw, mut c_star) = (0.0, 0.0, 0.0, 0.0);
    for c in clusters {
        let m = c.len() as f64;
        let ci = c.iter().sum::<f64>() / m;
        ssb += m * (ci - mean).powi(2);
        for &y in c {
            sst += (y - mean).powi(2);
            ssw += (y - ci).powi(2);
        }
        c_star += (m - m_bar) * m * ci * ci;
    }
    c_star /= (ni - 1) as f64;
    let equal_sizes = clusters.iter().all(|c| c.len() == clusters[0].len());
    let s2 = sst / (n - 1) as f64;
    let s2_within = ssw / (n - ni) as f64;
    let (rho, delta) = if sst > 0.0 {
        (1.0 - m_bar / (m_bar - 1.0) * ssw / sst, 1.0 - s2_within / s2)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(AnovaSummary {
        n_units: n,
        n_clusters: ni,
        sst,
        ssb,
        ssw,
        df_total: n - 1,
        df_between: ni - 1,
        df_within: n - ni,
        s2_between: ssb / (ni - 1) as f64,
        s2_within,
        s2,
        mean,
        m_bar,
        rho,
        delta,
        c_star,
        equal_sizes,
    })
}

impl AnovaSummary {
    /// Design effect of simple random cluster sampling for the total.
    /// Equal sizes give 1 + (M−1)ρ; otherwise the δ form with the size term.
    pub fn deff(&self) -> f64 {
        if self.equal_sizes {
            design_effect(self.m_bar, self.rho).unwrap_or(f64::NAN)
        } else {
            self.deff_unequal()
        }
    }

    /// 1 + (N−N_I)/(N_I−1)·δ + C*/(M̄ S²)
    pub fn deff_unequal(&self) -> f64 {
        design_effect_unequal(self.n_units, self.n_clusters, self.delta, self.c_star, self.m_bar, self.s2)
    }
}

/// 1 + (m − 1)ρ. `m` is the cluster size, or the subsample size for two-stage designs.
pub fn design_effect(m: f64, rho: f64) -> Result<f64> {
    if !(m >= 1.0) {
        return input(format!("cluster size must be at least 1, got {m}"));
    }
    if !rho.is_finite() {
        return input("intraclass correlation must be finite");
    }
    Ok(1.0 + (m - 1.0) * rho)
}

pub fn design_effect_unequal(n: usize, n_clusters: usize, delta: f64, c_star: f64, m_bar: f64, s2: f64) -> f64 {
    let k = (n - n_clusters) as f64 / (n_clusters - 1) as f64;
    1.0 + k * delta + c_star / (m_bar * s2)
}

/// Ratio of a design variance to the SRS variance of a proportion, p(1−p)/n.
pub fn proportion_deff(est: &Estimate, n_elements: f64) -> Result<f64> {
    let v = est.variance.ok_or_else(|| crate::Error::Input("estimate has no variance".into()))?;
    let p = est.value;
    let v_srs = p * (1.0 - p) / n_elements;
    if !(v_srs > 0.0) {
        return input("SRS variance of the proportion is zero");
    }
    Ok(v / v_srs)
}

pub fn effective_sample_size(n: f64, deff: f64) -> Result<f64> {
    if !(deff > 0.0) {
        return input(format!("design effect must be positive, got {deff}"));
    }
    Ok(n / deff)
}

/// Number of clusters of size `m` whose design gives the precision of an
/// SRS of `n_eff` elements: n_eff · deff / m.
pub fn required_clusters(n_eff: f64, deff: f64, m: f64) -> Result<f64> {
    if !(m > 0.0) || !(deff > 0.0) || !(n_eff > 0.0) {
        return input("required_clusters needs positive n_eff, deff and m");
    }
    Ok(n_eff * deff / m)
}

/// Conservative size for a proportion at 95%: with z ≈ 2 and p = 1/2 the
/// margin-of-error rule reduces to n ≥ d⁻².
pub fn proportion_size_rule(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return input("margin of error must be positive");
    }
    Ok(d.powi(-2))
}

/// z_{1−α/2}
pub fn normal_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return input(format!("alpha must lie in (0,1), got {alpha}"));
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(std.inverse_cdf(1.0 - alpha / 2.0))
}

/// Smallest n with S²/n·(1 − n/N) ≤ (d/z)², i.e. n ≥ S²/((d/z)² + S²/N).
/// `pop` = None means an infinite population.
pub fn srs_sample_size(s2: f64, d: f64, alpha: f64, pop: Option<f64>) -> Result<u64> {
    if !(s2 >= 0.0) || !(d > 0.0) {
        return input("srs_sample_size needs S² ≥ 0 and d > 0");
    }
    let z = normal_quantile(alpha)?;
    let inv = pop.map_or(0.0, |n| s2 / n);
    let n = s2 / ((d / z).powi(2) + inv);
    // guard against 2401.0000000001 style rounding
    let r = n.round();
    let n = if (n - r).abs() < 1e-9 * r.max(1.0) { r } else { n.ceil() };
    let mut n = n.max(1.0);
    if let Some(pop) = pop {
        n = n.min(pop.ceil());
    }
    Ok(n as u64)
}

//! Exact design expectations by enumeration and seeded Monte Carlo.

use crate::designs::{draw, enumerate_design, first_order_pips, hits_to_selections, Design};
use crate::error::{input, Error, Result};
use crate::frame::{Frame, Sample};
use crate::rng::RngStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest number of ordered draw sequences enumerated for with-replacement designs.
pub const WR_SEQUENCE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub support_size: usize,
}

/// Every possible sample with its probability. Without-replacement designs
/// come from `enumerate_design`; SRSWR and PPSWR are expanded over ordered
/// draw sequences and merged into multisets.
pub fn exact_samples(design: &Design, frame: &Frame) -> Result<Vec<(Sample, f64)>> {
    let n_units = frame.len();
    match design {
        Design::Srswr { n } | Design::PpsWr { n, .. } => {
            let p: Vec<f64> = match design {
                Design::Srswr { .. } => vec![1.0 / n_units as f64; n_units],
                _ => first_order_pips(design, frame)?.first_order,
            };
            let count = (n_units as f64).powi(*n as i32);
            if count > WR_SEQUENCE_CAP as f64 {
                return Err(Error::SupportTooLarge { size: count, cap: WR_SEQUENCE_CAP });
            }
            let mut merged: std::collections::BTreeMap<Vec<u32>, f64> = Default::default();
            let mut seq = vec![0usize; *n];
            loop {
                let mut hits = vec![0u32; n_units];
                let mut prob = 1.0;
                for &k in &seq {
                    hits[k] += 1;
                    prob *= p[k];
                }
                *merged.entry(hits).or_default() += prob;
                // odometer increment
                let mut pos = 0;
                loop {
                    if pos == *n {
                        break;
                    }
                    seq[pos] += 1;
                    if seq[pos] < n_units {
                        break;
                    }
                    seq[pos] = 0;
                    pos += 1;
                }
                if pos == *n {
                    break;
                }
            }
            let all: Vec<usize> = (0..n_units).collect();
            Ok(merged
                .into_iter()
                .filter(|(_, pr)| *pr > 0.0)
                .map(|(hits, pr)| {
                    let h: Vec<(usize, u32)> = hits.iter().enumerate().filter(|(_, &c)| c > 0).map(|(k, &c)| (k, c)).collect();
                    let mut s = Sample::new(design.tag(), hits_to_selections(&all, h, &p, *n));
                    s.with_replacement = true;
                    (s, pr)
                })
                .collect())
        }
        _ => {
            let dist = enumerate_design(design, frame)?;
            let pi = first_order_pips(design, frame)?.first_order;
            Ok(dist
                .support
                .into_iter()
                .map(|(set, pr)| (Sample::from_units(design.tag(), &set, &pi), pr))
                .collect())
        }
    }
}

/// `Σ_A P(A) stat(A)` and the exact design variance of `stat`.
pub fn exact_expectation(design: &Design, frame: &Frame, stat: impl Fn(&Sample) -> f64) -> Result<Moments> {
    let samples = exact_samples(design, frame)?;
    let vals: Vec<(f64, f64)> = samples.iter().map(|(s, p)| (stat(s), *p)).collect();
    let mean: f64 = vals.iter().map(|(v, p)| v * p).sum();
    let variance: f64 = vals.iter().map(|(v, p)| p * (v - mean).powi(2)).sum();
    Ok(Moments { mean, variance, support_size: vals.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub mean: f64,
    /// Between-replicate variance with divisor R − 1.
    pub var: f64,
    pub se_of_mean: f64,
    pub replicates: usize,
    /// Replicate r uses stream `RngStream::replicate(seed, r)`.
    pub seed: u64,
}

impl McSummary {
    /// (mean − truth)/se
    pub fn z_score(&self, truth: f64) -> f64 {
        if self.se_of_mean > 0.0 {
            (self.mean - truth) / self.se_of_mean
        } else if self.mean == truth {
            0.0
        } else {
            f64::INFINITY.copysign(self.mean - truth)
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Draw replicate `r` exactly as `monte_carlo` does.
pub fn replicate_sample(design: &Design, frame: &Frame, seed: u64, r: usize) -> Result<Sample> {
    let mut rng = RngStream::replicate(seed, r as u64).rng();
    draw(design, frame, &mut rng)
}

/// Run `r` replicates in parallel. Values are stored by replicate index
/// and summed in index order, so the result does not depend on scheduling.
pub fn monte_carlo(
    design: &Design,
    frame: &Frame,
    estimator: impl Fn(&Sample) -> Result<f64> + Sync,
    r: usize,
    seed: u64,
) -> Result<McSummary> {
    if r < 2 {
        return input(format!("Monte Carlo needs at least 2 replicates, got {r}"));
    }
    let vals: Vec<f64> = (0..r)
        .into_par_iter()
        .map(|k| estimator(&replicate_sample(design, frame, seed, k)?))
        .collect::<Result<_>>()?;
    let mut s = Kahan::default();
    for &v in &vals {
        s.add(v);
    }
    let mean = s.sum / r as f64;
    let mut q = Kahan::default();
    for &v in &vals {
        q.add((v - mean).powi(2));
    }
    let var = q.sum / (r - 1) as f64;
    Ok(McSummary { mean, var, se_of_mean: (var / r as f64).sqrt(), replicates: r, seed })
}

/// Empirical inclusion frequencies over `r` replicates with their binomial SEs.
pub fn monte_carlo_inclusion(design: &Design, frame: &Frame, r: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if r < 2 {
        return input(format!("Monte Carlo needs at least 2 replicates, got {r}"));
    }
    let n = frame.len();
    let counts = (0..r)
        .into_par_iter()
        .map(|k| -> Result<Vec<u64>> {
            let s = replicate_sample(design, frame, seed, k)?;
            let mut c = vec![0u64; n];
            for u in s.units() {
                c[u] = 1;
            }
            Ok(c)
        })
        .try_reduce(|| vec![0u64; n], |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            Ok(a)
        })?;
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / r as f64).collect();
    let se = freq.iter().map(|p| (p * (1.0 - p) / r as f64).sqrt()).collect();
    Ok((freq, se))
}

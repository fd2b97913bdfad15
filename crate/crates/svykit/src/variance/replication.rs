//! Replication variance: jackknife and balanced repeated replication.

use super::psu_keys;
use crate::error::{input, Error, Result};
use crate::estimators::Estimate;
use crate::frame::Sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JackknifeStructure {
    /// Delete one unit at a time; `(n−1)/n Σ (θ̂_(k) − θ̄)²`.
    Iid,
    /// Delete one PSU within a stratum, reweighting the rest of that
    /// stratum by `n_h/(n_h−1)`.
    StratifiedPsu,
    /// Delete one of `groups` groups; unit `k` in sample order belongs to
    /// group `k mod groups`.
    Grouped { groups: usize },
}

/// One replicate: its weights and the factor and stratum of its term.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub weights: Vec<f64>,
    pub stratum: usize,
}

/// Replicate weights for a jackknife structure, with the per-stratum
/// multiplier `(n_h − 1)/n_h`.
pub fn jackknife_replicates(sample: &Sample, structure: JackknifeStructure) -> Result<(Vec<Replicate>, BTreeMap<usize, f64>)> {
    let w = sample.weights();
    let n = w.len();
    // cluster id per unit and stratum per cluster
    let (keys, strata): (Vec<(usize, usize)>, bool) = match structure {
        JackknifeStructure::Iid => ((0..n).map(|k| (0, k)).collect(), false),
        JackknifeStructure::Grouped { groups } => {
            if groups < 2 || groups > n {
                return input(format!("grouped jackknife needs 2 ≤ groups ≤ {n}"));
            }
            ((0..n).map(|k| (0, k % groups)).collect(), false)
        }
        JackknifeStructure::StratifiedPsu => (psu_keys(sample), true),
    };
    let mut members: BTreeMap<usize, BTreeMap<usize, Vec<usize>>> = BTreeMap::new();
    for (k, (h, p)) in keys.iter().enumerate() {
        members.entry(*h).or_default().entry(*p).or_default().push(k);
    }
    let mut reps = Vec::new();
    let mut factors = BTreeMap::new();
    for (h, psus) in &members {
        let nh = psus.len();
        if nh < 2 {
            return Err(Error::Data(if strata {
                format!("stratum {h} has a single PSU")
            } else {
                "jackknife needs at least two units".into()
            }));
        }
        let scale = nh as f64 / (nh as f64 - 1.0);
        factors.insert(*h, (nh as f64 - 1.0) / nh as f64);
        for drop in psus.values() {
            let mut rw = w.clone();
            for units in psus.values() {
                for &k in units {
                    rw[k] *= scale;
                }
            }
            for &k in drop {
                rw[k] = 0.0;
            }
            reps.push(Replicate { weights: rw, stratum: *h });
        }
    }
    Ok((reps, factors))
}

/// Jackknife variance of `estimator`, which maps weights aligned with the
/// sample to a point estimate. With `fpc` each stratum term is multiplied by
/// `1 − f_h`, `f_h` the mean first-stage inclusion probability there.
pub fn jackknife_variance<F>(sample: &Sample, estimator: F, structure: JackknifeStructure, fpc: bool) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let theta = estimator(&sample.weights());
    let (reps, factors) = jackknife_replicates(sample, structure)?;
    let values: Vec<f64> = reps.par_iter().map(|r| estimator(&r.weights)).collect();
    let mut by: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (r, v) in reps.iter().zip(&values) {
        by.entry(r.stratum).or_default().push(*v);
    }
    let mut f_h: BTreeMap<usize, f64> = BTreeMap::new();
    if fpc {
        let keys = psu_keys(sample);
        let mut acc: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for (s, (h, _)) in sample.selections.iter().zip(&keys) {
            let e = acc.entry(*h).or_default();
            e.0 += s.stage1_pi.unwrap_or(s.pi);
            e.1 += 1.0;
        }
        for (h, (a, b)) in acc {
            f_h.insert(h, a / b);
        }
    }
    let mut v = 0.0;
    for (h, vals) in &by {
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let ss: f64 = vals.iter().map(|x| (x - m).powi(2)).sum();
        let key = if matches!(structure, JackknifeStructure::StratifiedPsu) { *h } else { 0 };
        let f = if fpc { f_h.get(&key).copied().unwrap_or(0.0) } else { 0.0 };
        v += factors[h] * ss * (1.0 - f);
    }
    let mut e = Estimate::point(theta, "jackknife").with_variance(v).diag("replicates", values.len() as f64);
    if fpc {
        e.flag("fpc");
    }
    Ok(e)
}

/// A ±1 matrix with `MᵀM = G·I`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HadamardMatrix {
    pub order: usize,
    pub rows: Vec<Vec<i8>>,
}

impl HadamardMatrix {
    pub fn is_orthogonal(&self) -> bool {
        let g = self.order;
        (0..g).all(|a| {
            (0..g).all(|b| {
                let s: i64 = (0..g).map(|r| (self.rows[r][a] as i64) * (self.rows[r][b] as i64)).sum();
                s == if a == b { g as i64 } else { 0 }
            })
        })
    }
}

fn supported_order(g: usize) -> bool {
    g == 1 || g == 2 || (g >= 4 && g.is_multiple_of(4) && (g / 4).is_power_of_two())
}

/// Hadamard matrix of order 1, 2, or 4·2^k. Order 4 is the matrix
/// [[1,1,1,1],[1,−1,1,−1],[1,−1,−1,1],[1,1,−1,−1]]; larger orders double it
/// with the Sylvester construction.
pub fn make_hadamard(g: usize) -> Result<HadamardMatrix> {
    if !supported_order(g) {
        let avail: Vec<String> = [1usize, 2, 4, 8, 16, 32, 64, 128].iter().map(|x| x.to_string()).collect();
        return input(format!(
            "no Hadamard construction for order {g}; available orders are {} and further powers of two",
            avail.join(", ")
        ));
    }
    let rows: Vec<Vec<i8>> = match g {
        1 => vec![vec![1]],
        2 => vec![vec![1, 1], vec![1, -1]],
        _ => {
            let mut m: Vec<Vec<i8>> = vec![vec![1, 1, 1, 1], vec![1, -1, 1, -1], vec![1, -1, -1, 1], vec![1, 1, -1, -1]];
            while m.len() < g {
                let k = m.len();
                let mut next = vec![vec![0i8; 2 * k]; 2 * k];
                for r in 0..k {
                    for c in 0..k {
                        next[r][c] = m[r][c];
                        next[r][c + k] = m[r][c];
                        next[r + k][c] = m[r][c];
                        next[r + k][c + k] = -m[r][c];
                    }
                }
                m = next;
            }
            m
        }
    };
    Ok(HadamardMatrix { order: g, rows })
}

/// Smallest supported order above `h`, so that the all-ones first column
/// can be skipped.
pub fn hadamard_for_strata(h: usize) -> Result<HadamardMatrix> {
    let g = (h + 1..).find(|&g| supported_order(g)).unwrap();
    make_hadamard(g)
}

/// Two PSUs per stratum, in (stratum, PSU) order.
fn paired_psus(sample: &Sample) -> Result<Vec<[Vec<usize>; 2]>> {
    let mut members: BTreeMap<usize, BTreeMap<usize, Vec<usize>>> = BTreeMap::new();
    for (k, (h, p)) in psu_keys(sample).into_iter().enumerate() {
        members.entry(h).or_default().entry(p).or_default().push(k);
    }
    members
        .into_iter()
        .map(|(h, psus)| {
            if psus.len() != 2 {
                return Err(Error::Data(format!("BRR needs exactly two PSUs in every stratum; stratum {h} has {}", psus.len())));
            }
            let mut it = psus.into_values();
            Ok([it.next().unwrap(), it.next().unwrap()])
        })
        .collect()
}

/// Half-sample replicate weights: stratum `h` keeps its first PSU when
/// `ε_h^(g) = +1`, the second otherwise, at twice the weight. Column `h+1`
/// of the Hadamard matrix gives `ε_h`.
pub fn brr_replicates(sample: &Sample, hadamard: &HadamardMatrix) -> Result<Vec<Vec<f64>>> {
    let pairs = paired_psus(sample)?;
    let h = pairs.len();
    if hadamard.order <= h {
        return input(format!("Hadamard order {} must exceed the number of strata {h}", hadamard.order));
    }
    let w = sample.weights();
    Ok(hadamard
        .rows
        .iter()
        .map(|row| {
            let mut rw = vec![0.0; w.len()];
            for (s, pair) in pairs.iter().enumerate() {
                let keep = if row[s + 1] > 0 { &pair[0] } else { &pair[1] };
                for &k in keep {
                    rw[k] = 2.0 * w[k];
                }
            }
            rw
        })
        .collect())
}

/// `G⁻¹ Σ_g (θ̂_(g) − θ̂)²` over balanced half-samples.
pub fn brr_variance<F>(sample: &Sample, estimator: F, hadamard: Option<&HadamardMatrix>) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let h = paired_psus(sample)?.len();
    let owned;
    let m = match hadamard {
        Some(m) => m,
        None => {
            owned = hadamard_for_strata(h)?;
            &owned
        }
    };
    let theta = estimator(&sample.weights());
    let reps = brr_replicates(sample, m)?;
    let values: Vec<f64> = reps.par_iter().map(|w| estimator(w)).collect();
    let v = values.iter().map(|t| (t - theta).powi(2)).sum::<f64>() / values.len() as f64;
    Ok(Estimate::point(theta, "brr").with_variance(v).diag("replicates", values.len() as f64))
}

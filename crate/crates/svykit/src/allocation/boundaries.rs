//! Stratum boundaries on a single stratification variable.
//!
//! Boundaries `b_1 < … < b_{H−1}` put `y ≤ b_1` in the first stratum and
//! `b_{h−1} < y ≤ b_h` in stratum h.

use crate::error::{input, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMethod {
    /// Cumulative √f rule over `bins` equal-width classes (default max(50, 10H)).
    DaleniusHodges { bins: Option<usize> },
    Sequential,
    Kmeans { restarts: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    pub cuts: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Σ N_h S_h of the resulting strata.
    pub sum_nh_sh: f64,
    /// Σ W_h S_h² of the resulting strata.
    pub sum_wh_sh2: f64,
    pub iterations: usize,
}

pub fn stratum_of(cuts: &[f64], y: f64) -> usize {
    cuts.partition_point(|&b| b < y)
}

fn sorted(values: &[f64], h: usize) -> Result<Vec<f64>> {
    if h < 2 {
        return input("need at least two strata");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return input("values must be finite");
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = v.clone();
    distinct.dedup();
    if h > distinct.len() {
        return input(format!("{h} strata requested but only {} distinct values", distinct.len()));
    }
    Ok(v)
}

/// Stratum (count, S_h) for the sorted range `lo..hi`.
fn stats(prefix: &[f64], prefix2: &[f64], lo: usize, hi: usize) -> (f64, f64) {
    let n = (hi - lo) as f64;
    if n < 2.0 {
        return (n, 0.0);
    }
    let s = prefix[hi] - prefix[lo];
    let s2 = prefix2[hi] - prefix2[lo];
    let var = ((s2 - s * s / n) / (n - 1.0)).max(0.0);
    (n, var.sqrt())
}

struct Sorted {
    v: Vec<f64>,
    p: Vec<f64>,
    p2: Vec<f64>,
}

impl Sorted {
    fn new(v: Vec<f64>) -> Self {
        let mut p = vec![0.0];
        let mut p2 = vec![0.0];
        for &x in &v {
            p.push(p.last().unwrap() + x);
            p2.push(p2.last().unwrap() + x * x);
        }
        Sorted { v, p, p2 }
    }

    /// Split positions (exclusive ends) of each stratum for the given cuts.
    fn ends(&self, cuts: &[f64]) -> Vec<usize> {
        let mut e: Vec<usize> = cuts.iter().map(|&b| self.v.partition_point(|&x| x <= b)).collect();
        e.push(self.v.len());
        e
    }

    fn summary(&self, ends: &[usize]) -> (Vec<usize>, f64, f64) {
        let total = self.v.len() as f64;
        let mut lo = 0;
        let mut sizes = Vec::new();
        let mut a = 0.0;
        let mut b = 0.0;
        for &hi in ends {
            let (n, s) = stats(&self.p, &self.p2, lo, hi);
            sizes.push(hi - lo);
            a += n * s;
            b += n / total * s * s;
            lo = hi;
        }
        (sizes, a, b)
    }

    fn result(&self, cuts: Vec<f64>, iterations: usize) -> Boundaries {
        let (sizes, sum_nh_sh, sum_wh_sh2) = self.summary(&self.ends(&cuts));
        Boundaries { cuts, sizes, sum_nh_sh, sum_wh_sh2, iterations }
    }
}

pub fn stratum_boundaries<R: Rng + ?Sized>(
    values: &[f64],
    h: usize,
    method: BoundaryMethod,
    rng: &mut R,
) -> Result<Boundaries> {
    let s = Sorted::new(sorted(values, h)?);
    match method {
        BoundaryMethod::DaleniusHodges { bins } => dalenius_hodges(&s, h, bins.unwrap_or((10 * h).max(50))),
        BoundaryMethod::Sequential => Ok(sequential(&s, h)),
        BoundaryMethod::Kmeans { restarts } => Ok(kmeans(&s, h, restarts.max(1), rng)),
    }
}

fn dalenius_hodges(s: &Sorted, h: usize, bins: usize) -> Result<Boundaries> {
    if bins <= 2 * h {
        return input(format!("{bins} classes is too few for {h} strata"));
    }
    let lo = s.v[0];
    let hi = *s.v.last().unwrap();
    let width = (hi - lo) / bins as f64;
    let mut freq = vec![0.0; bins];
    for &x in &s.v {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        freq[k] += 1.0;
    }
    let mut cum = Vec::with_capacity(bins);
    let mut acc = 0.0;
    for f in &freq {
        acc += f64::sqrt(*f);
        cum.push(acc);
    }
    let mut cuts: Vec<f64> = Vec::new();
    for k in 1..h {
        let target = acc * k as f64 / h as f64;
        let j = cum
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().partial_cmp(&(b.1 - target).abs()).unwrap())
            .unwrap()
            .0;
        let edge = lo + width * (j + 1) as f64;
        if cuts.last().is_none_or(|&c| edge > c) && edge < hi {
            cuts.push(edge);
        }
    }
    Ok(s.result(cuts, 1))
}

fn sequential(s: &Sorted, h: usize) -> Boundaries {
    let n = s.v.len();
    let lo = s.v[0];
    let hi = s.v[n - 1];
    // Equal-width start, repaired so every stratum is nonempty.
    let mut ends: Vec<usize> = (1..h)
        .map(|k| s.v.partition_point(|&x| x <= lo + (hi - lo) * k as f64 / h as f64))
        .collect();
    ends.push(n);
    repair(&s.v, &mut ends);
    let objective = |e: &[usize]| s.summary(e).1;
    let mut best = objective(&ends);
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut lo_i = 0;
        let mut q = Vec::with_capacity(h);
        for &hi_i in &ends {
            let (m, sd) = stats(&s.p, &s.p2, lo_i, hi_i);
            q.push(m * sd);
            lo_i = hi_i;
        }
        let mut order: Vec<usize> = (0..h).collect();
        order.sort_by(|&a, &b| q[b].partial_cmp(&q[a]).unwrap());
        let mut improved = false;
        'strata: for &k in &order {
            // Shrink stratum k by moving its right boundary left, or its left boundary right.
            let mut moves = Vec::new();
            if k + 1 < h {
                moves.push((k, false));
            }
            if k > 0 {
                moves.push((k - 1, true));
            }
            for (b, right) in moves {
                if let Some(cand) = shift(&s.v, &ends, b, right) {
                    let v = objective(&cand);
                    if v < best - 1e-12 * best.abs().max(1.0) {
                        best = v;
                        ends = cand;
                        improved = true;
                        break 'strata;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    let cuts = ends[..h - 1].iter().map(|&e| s.v[e - 1]).collect();
    s.result(cuts, iterations)
}

/// Move boundary `b` one distinct value right or left.
fn shift(v: &[f64], ends: &[usize], b: usize, right: bool) -> Option<Vec<usize>> {
    let lo = if b == 0 { 0 } else { ends[b - 1] };
    let hi = ends[b + 1];
    let e = ends[b];
    let new = if right {
        let x = v[e];
        v.partition_point(|&y| y <= x)
    } else {
        let x = v[e - 1];
        v.partition_point(|&y| y < x)
    };
    if new <= lo || new >= hi {
        return None;
    }
    let mut out = ends.to_vec();
    out[b] = new;
    Some(out)
}

fn repair(v: &[f64], ends: &mut [usize]) {
    let h = ends.len();
    let mut distinct_ends: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let x = v[i];
        i = v.partition_point(|&y| y <= x);
        distinct_ends.push(i);
    }
    for k in 0..h - 1 {
        let min = if k == 0 { 0 } else { ends[k - 1] };
        if ends[k] <= min {
            ends[k] = *distinct_ends.iter().find(|&&e| e > min).unwrap();
        }
    }
    for k in (0..h - 1).rev() {
        let max = ends[k + 1];
        if ends[k] >= max {
            ends[k] = *distinct_ends.iter().rev().find(|&&e| e < max).unwrap();
        }
    }
}

fn kmeans<R: Rng + ?Sized>(s: &Sorted, h: usize, restarts: usize, rng: &mut R) -> Boundaries {
    let mut distinct = s.v.clone();
    distinct.dedup();
    let mut best: Option<(f64, Vec<usize>, usize)> = None;
    for _ in 0..restarts {
        let mut centers: Vec<f64> = rand::seq::index::sample(rng, distinct.len(), h)
            .into_iter()
            .map(|i| distinct[i])
            .collect();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ends = Vec::new();
        let mut it = 0;
        for _ in 0..1000 {
            it += 1;
            // In one dimension nearest-center cells are intervals split at midpoints.
            let mut new_ends: Vec<usize> = centers
                .windows(2)
                .map(|w| s.v.partition_point(|&x| x <= 0.5 * (w[0] + w[1])))
                .collect();
            new_ends.push(s.v.len());
            repair(&s.v, &mut new_ends);
            let mut lo = 0;
            for (k, &hi) in new_ends.iter().enumerate() {
                centers[k] = (s.p[hi] - s.p[lo]) / (hi - lo) as f64;
                lo = hi;
            }
            if new_ends == ends {
                break;
            }
            ends = new_ends;
        }
        let ss = within_ss(s, &ends);
        if best.as_ref().is_none_or(|b| ss < b.0) {
            best = Some((ss, ends, it));
        }
    }
    let (_, ends, it) = best.unwrap();
    let cuts = ends[..h - 1].iter().map(|&e| s.v[e - 1]).collect();
    s.result(cuts, it)
}

fn within_ss(s: &Sorted, ends: &[usize]) -> f64 {
    let mut lo = 0;
    let mut ss = 0.0;
    for &hi in ends {
        let n = (hi - lo) as f64;
        let a = s.p[hi] - s.p[lo];
        ss += s.p2[hi] - s.p2[lo] - a * a / n;
        lo = hi;
    }
    ss
}

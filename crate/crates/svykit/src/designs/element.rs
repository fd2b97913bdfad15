//! Equal-probability and independent-trial selection schemes. All functions
//! work on local positions `0..N` and return them in ascending order.

use crate::error::{input, Result};
use crate::rng::{unif, unif_oc};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrsMethod {
    #[default]
    DrawByDraw,
    SelectionRejection,
    Reservoir,
    RandomSort,
}

pub fn select_srs<R: Rng + ?Sized>(n_pop: usize, n: usize, method: SrsMethod, rng: &mut R) -> Result<Vec<usize>> {
    if n == 0 {
        return input("SRS needs n >= 1");
    }
    if n > n_pop {
        return input(format!("SRS sample size {n} exceeds population size {n_pop}"));
    }
    let mut out = match method {
        SrsMethod::DrawByDraw => {
            let mut pool: Vec<usize> = (0..n_pop).collect();
            for k in 0..n {
                let j = rng.random_range(k..n_pop);
                pool.swap(k, j);
            }
            pool.truncate(n);
            pool
        }
        SrsMethod::SelectionRejection => {
            let mut out = Vec::with_capacity(n);
            for k in 0..n_pop {
                let need = (n - out.len()) as f64;
                if unif(rng) < need / (n_pop - k) as f64 {
                    out.push(k);
                }
            }
            out
        }
        SrsMethod::Reservoir => reservoir(0..n_pop, n, rng),
        SrsMethod::RandomSort => {
            let mut keys: Vec<(f64, usize)> = (0..n_pop).map(|k| (unif(rng), k)).collect();
            keys.sort_by(|a, b| b.0.total_cmp(&a.0));
            keys.into_iter().take(n).map(|(_, k)| k).collect()
        }
    };
    out.sort_unstable();
    Ok(out)
}

/// Reservoir sampling over a stream of unknown length. Stopping after any
/// prefix of `k >= n` items leaves an SRS of size `n` from that prefix.
pub fn reservoir<T, I, R>(items: I, n: usize, rng: &mut R) -> Vec<T>
where
    I: IntoIterator<Item = T>,
    R: Rng + ?Sized,
{
    let mut res: Vec<T> = Vec::with_capacity(n);
    for (k, item) in items.into_iter().enumerate() {
        if k < n {
            res.push(item);
        } else if unif(rng) < n as f64 / (k + 1) as f64 {
            let slot = rng.random_range(0..n);
            res[slot] = item;
        }
    }
    res
}

/// SRS with replacement: `(position, hits)` pairs.
pub fn select_srswr<R: Rng + ?Sized>(n_pop: usize, n: usize, rng: &mut R) -> Result<Vec<(usize, u32)>> {
    if n_pop == 0 {
        return input("empty frame");
    }
    if n == 0 {
        return input("SRSWR needs n >= 1");
    }
    let mut hits = vec![0u32; n_pop];
    for _ in 0..n {
        hits[rng.random_range(0..n_pop)] += 1;
    }
    Ok(collect_hits(&hits))
}

pub(crate) fn collect_hits(hits: &[u32]) -> Vec<(usize, u32)> {
    hits.iter().enumerate().filter(|(_, &h)| h > 0).map(|(i, &h)| (i, h)).collect()
}

pub fn check_probs(pi: &[f64]) -> Result<()> {
    for (i, &p) in pi.iter().enumerate() {
        if !(p > 0.0 && p <= 1.0) {
            return input(format!("probability {p} at position {i} is outside (0,1]"));
        }
    }
    Ok(())
}

pub fn select_poisson<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    check_probs(pi)?;
    Ok(pi.iter().enumerate().filter(|(_, &p)| unif(rng) < p).map(|(i, _)| i).collect())
}

pub fn select_bernoulli<R: Rng + ?Sized>(n_pop: usize, pi: f64, rng: &mut R) -> Result<Vec<usize>> {
    select_poisson(&vec![pi; n_pop], rng)
}

/// Interval `G` and remainder `c` with `N = n·G + c`.
pub fn systematic_interval(n_pop: usize, n: usize) -> Result<(usize, usize)> {
    if n == 0 || n > n_pop {
        return input(format!("systematic sampling needs 1 <= n <= N (n={n}, N={n_pop})"));
    }
    let g = n_pop / n;
    Ok((g, n_pop - n * g))
}

/// Units `r, r+G, r+2G, ...` (start `r` is 1-based, as printed in frame order).
pub fn systematic_from_start(n_pop: usize, g: usize, r: usize) -> Vec<usize> {
    (r - 1..n_pop).step_by(g).collect()
}

pub fn select_systematic<R: Rng + ?Sized>(n_pop: usize, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    let (g, _) = systematic_interval(n_pop, n)?;
    let r = rng.random_range(1..=g);
    Ok(systematic_from_start(n_pop, g, r))
}

/// Probability-proportional-to-size draw by the cumulative total method.
pub fn pps_draw_cumulative<R: Rng + ?Sized>(cum: &[f64], rng: &mut R) -> usize {
    let total = *cum.last().unwrap();
    let r = unif_oc(rng) * total;
    // first k with cum[k] >= r
    let k = cum.partition_point(|&c| c < r);
    k.min(cum.len() - 1)
}

pub fn cumulative(x: &[f64]) -> Vec<f64> {
    x.iter()
        .scan(0.0, |s, &v| {
            *s += v;
            Some(*s)
        })
        .collect()
}

pub fn select_pps_wr_cumulative<R: Rng + ?Sized>(mos: &[f64], n: usize, rng: &mut R) -> Result<Vec<(usize, u32)>> {
    check_mos(mos)?;
    let cum = cumulative(mos);
    let mut hits = vec![0u32; mos.len()];
    for _ in 0..n {
        hits[pps_draw_cumulative(&cum, rng)] += 1;
    }
    Ok(collect_hits(&hits))
}

/// Lahiri's acceptance method: pick a unit uniformly and accept it when a
/// uniform draw on `(0, bound)` falls below its size.
pub fn select_pps_wr_lahiri<R: Rng + ?Sized>(mos: &[f64], n: usize, bound: f64, rng: &mut R) -> Result<Vec<(usize, u32)>> {
    check_mos(mos)?;
    let max = mos.iter().cloned().fold(0.0, f64::max);
    if !(bound > max) {
        return input(format!("Lahiri bound {bound} must exceed the largest size {max}"));
    }
    let mut hits = vec![0u32; mos.len()];
    let mut got = 0;
    while got < n {
        let k = rng.random_range(0..mos.len());
        if unif(rng) * bound < mos[k] {
            hits[k] += 1;
            got += 1;
        }
    }
    Ok(collect_hits(&hits))
}

/// Default Lahiri bound: the smallest power of ten above the largest size.
pub fn default_lahiri_bound(mos: &[f64]) -> f64 {
    let max = mos.iter().cloned().fold(0.0, f64::max);
    let mut b = 1.0;
    while b <= max {
        b *= 10.0;
    }
    b
}

pub(crate) fn check_mos(mos: &[f64]) -> Result<()> {
    if mos.is_empty() {
        return input("empty frame");
    }
    if mos.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
        return input("sizes must be finite and nonnegative");
    }
    if mos.iter().all(|&m| m == 0.0) {
        return input("all sizes are zero");
    }
    Ok(())
}

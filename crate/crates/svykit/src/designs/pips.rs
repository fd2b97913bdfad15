//! Without-replacement unequal-probability (πps) schemes.

use super::element::{check_mos, cumulative};
use crate::error::{input, Error, Result};
use crate::rng::{unif, unif_oc};
use rand::Rng;
use std::collections::BTreeMap;

/// Inclusion probabilities proportional to size with iterative capping:
/// units whose share would exceed one are taken with certainty and the
/// remaining sample is spread over the rest. The result sums to `n`.
pub fn compute_pips(mos: &[f64], n: usize) -> Result<Vec<f64>> {
    check_mos(mos)?;
    let positive = mos.iter().filter(|&&m| m > 0.0).count();
    if positive < n {
        return input(format!("only {positive} units have positive size, need {n}"));
    }
    let mut pi = vec![0.0; mos.len()];
    let mut certain = vec![false; mos.len()];
    loop {
        let n_left = n - certain.iter().filter(|&&c| c).count();
        let total: f64 = mos.iter().zip(&certain).filter(|(_, &c)| !c).map(|(m, _)| m).sum();
        let mut capped = false;
        for i in 0..mos.len() {
            if certain[i] {
                pi[i] = 1.0;
                continue;
            }
            pi[i] = if total > 0.0 { n_left as f64 * mos[i] / total } else { 0.0 };
            if pi[i] >= 1.0 {
                certain[i] = true;
                capped = true;
            }
        }
        if !capped {
            return Ok(pi);
        }
    }
}

pub(crate) fn split_certain(pi: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let certain = (0..pi.len()).filter(|&i| pi[i] >= 1.0 - 1e-12).collect();
    let rest = (0..pi.len()).filter(|&i| pi[i] < 1.0 - 1e-12).collect();
    (certain, rest)
}

fn two_draw_probs(pi: &[f64]) -> Result<Vec<f64>> {
    let s: f64 = pi.iter().sum();
    if (s - 2.0).abs() > 1e-9 {
        return input(format!("n=2 schemes need probabilities summing to 2 (got {s})"));
    }
    let p: Vec<f64> = pi.iter().map(|&q| q / 2.0).collect();
    if let Some(i) = p.iter().position(|&q| q >= 0.5) {
        return input(format!("position {i}: draw probability must be below 1/2 for n=2 schemes"));
    }
    Ok(p)
}

fn pick<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let cum = cumulative(w);
    let r = unif_oc(rng) * cum.last().unwrap();
    cum.partition_point(|&c| c < r).min(w.len() - 1)
}

/// Brewer's first-draw weights θ_i ∝ p_i(1-p_i)/(1-2p_i).
pub fn brewer_first(p: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = p.iter().map(|&q| q * (1.0 - q) / (1.0 - 2.0 * q)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Durbin's second-draw weights given the first unit `i`.
pub fn durbin_second(p: &[f64], i: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..p.len())
        .map(|j| if j == i { 0.0 } else { p[j] * (1.0 / (1.0 - 2.0 * p[i]) + 1.0 / (1.0 - 2.0 * p[j])) })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub fn brewer_second(p: &[f64], i: usize) -> Vec<f64> {
    (0..p.len()).map(|j| if j == i { 0.0 } else { p[j] / (1.0 - p[i]) }).collect()
}

pub fn select_brewer2<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let p = two_draw_probs(pi)?;
    let i = pick(&brewer_first(&p), rng);
    let j = pick(&brewer_second(&p, i), rng);
    Ok(sorted(vec![i, j]))
}

pub fn select_durbin2<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let p = two_draw_probs(pi)?;
    let i = pick(&p, rng);
    let j = pick(&durbin_second(&p, i), rng);
    Ok(sorted(vec![i, j]))
}

/// Exact pair probabilities of the Brewer or Durbin scheme by summing both
/// draw orders.
pub fn two_draw_support(pi: &[f64], durbin: bool) -> Result<Vec<(Vec<usize>, f64)>> {
    let p = two_draw_probs(pi)?;
    let first = if durbin { p.clone() } else { brewer_first(&p) };
    let mut m: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..p.len() {
        let second = if durbin { durbin_second(&p, i) } else { brewer_second(&p, i) };
        for j in 0..p.len() {
            if i != j {
                *m.entry((i.min(j), i.max(j))).or_default() += first[i] * second[j];
            }
        }
    }
    Ok(m.into_iter().map(|((i, j), q)| (vec![i, j], q)).collect())
}

/// Joint inclusion probabilities shared by the Brewer and Durbin schemes:
/// π_ij = 2 p_i p_j (1/(1-2p_i) + 1/(1-2p_j)) / (1 + K), K = Σ p/(1-2p).
pub fn two_draw_joint(pi: &[f64]) -> Result<Vec<Vec<f64>>> {
    let p = two_draw_probs(pi)?;
    let k: f64 = p.iter().map(|&q| q / (1.0 - 2.0 * q)).sum();
    let n = p.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = if i == j {
                pi[i]
            } else {
                2.0 * p[i] * p[j] / (1.0 + k) * (1.0 / (1.0 - 2.0 * p[i]) + 1.0 / (1.0 - 2.0 * p[j]))
            };
        }
    }
    Ok(m)
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Systematic πps over cumulated π with a single random start in (0, 1].
pub fn select_systematic_pips<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let n = check_fixed(pi)?;
    let r = unif_oc(rng);
    Ok(systematic_pips_at(pi, n, r))
}

fn check_fixed(pi: &[f64]) -> Result<usize> {
    super::element::check_probs(pi)?;
    let s: f64 = pi.iter().sum();
    let n = s.round();
    if (s - n).abs() > 1e-9 || n < 1.0 {
        return input(format!("fixed-size schemes need probabilities summing to an integer (got {s})"));
    }
    Ok(n as usize)
}

/// Units hit by the points `r, r+1, ..., r+n-1` on the cumulated π scale.
pub fn systematic_pips_at(pi: &[f64], n: usize, r: f64) -> Vec<usize> {
    let cum = cumulative(pi);
    let mut out = Vec::with_capacity(n);
    for l in 0..n {
        let t = r + l as f64;
        // unit k with L_k < t <= U_k
        let k = cum.partition_point(|&c| c < t - 1e-12).min(pi.len() - 1);
        out.push(k);
    }
    out.dedup();
    out
}

/// Exact support of systematic πps: breakpoints of the fractional parts of
/// the cumulated π split (0, 1] into pieces that each give one sample.
pub fn systematic_pips_support(pi: &[f64]) -> Result<Vec<(Vec<usize>, f64)>> {
    let n = check_fixed(pi)?;
    let cum = cumulative(pi);
    let mut cuts: Vec<f64> = vec![0.0, 1.0];
    for &c in &cum {
        let f = c - c.floor();
        if f > 1e-12 && f < 1.0 - 1e-12 {
            cuts.push(f);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        out.push((systematic_pips_at(pi, n, w[1]), len));
    }
    Ok(out)
}

/// Chao's unequal-probability reservoir. The first `n` items fill the
/// reservoir; item `k` then enters with probability `n·x_k / Σ_{i≤k} x_i`
/// and evicts a uniformly chosen member.
#[derive(Debug, Clone)]
pub struct ChaoReservoir<T> {
    n: usize,
    seen: usize,
    total: f64,
    items: Vec<T>,
}

impl<T> ChaoReservoir<T> {
    pub fn new(n: usize) -> Self {
        ChaoReservoir { n, seen: 0, total: 0.0, items: Vec::with_capacity(n) }
    }

    pub fn push<R: Rng + ?Sized>(&mut self, item: T, x: f64, rng: &mut R) -> Result<()> {
        if !(x >= 0.0) {
            return input("sizes must be nonnegative");
        }
        self.seen += 1;
        self.total += x;
        if self.items.len() < self.n {
            self.items.push(item);
            return Ok(());
        }
        let q = self.n as f64 * x / self.total;
        if q > 1.0 + 1e-12 {
            return input(format!(
                "item {} would be selected with probability {q:.4} > 1; extract certainty units first",
                self.seen
            ));
        }
        if unif(rng) < q {
            let slot = rng.random_range(0..self.n);
            self.items[slot] = item;
        }
        Ok(())
    }

    pub fn finish(self) -> Vec<T> {
        self.items
    }
}

pub fn select_chao<R: Rng + ?Sized>(mos: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    check_chao(mos, n)?;
    let mut res = ChaoReservoir::new(n);
    for (i, &x) in mos.iter().enumerate() {
        res.push(i, x, rng)?;
    }
    Ok(sorted(res.finish()))
}

fn check_chao(mos: &[f64], n: usize) -> Result<()> {
    check_mos(mos)?;
    if n == 0 || n > mos.len() {
        return input(format!("Chao sampling needs 1 <= n <= N (n={n}, N={})", mos.len()));
    }
    Ok(())
}

/// Exact inclusion probabilities after the whole stream: units after the
/// initial reservoir get `n·x_j/Σx`, the initial `n` get `Σ_{i≤n} x_i / Σx`.
pub fn chao_pips(mos: &[f64], n: usize) -> Result<Vec<f64>> {
    check_chao(mos, n)?;
    let total: f64 = mos.iter().sum();
    let head: f64 = mos[..n].iter().sum();
    let mut run = head;
    for (k, &x) in mos.iter().enumerate().skip(n) {
        run += x;
        if n as f64 * x / run > 1.0 + 1e-12 {
            return input(format!("item {} would be selected with probability above 1", k + 1));
        }
    }
    Ok((0..mos.len())
        .map(|j| if j < n { head / total } else { n as f64 * mos[j] / total })
        .collect())
}

/// Exact distribution of the reservoir after the stream, by propagating the
/// probability of every reservoir state.
pub fn chao_support(mos: &[f64], n: usize, cap: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    chao_pips(mos, n)?;
    let mut states: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    states.insert((0..n).collect(), 1.0);
    let mut run: f64 = mos[..n].iter().sum();
    for (k, &x) in mos.iter().enumerate().skip(n) {
        run += x;
        let q = n as f64 * x / run;
        let mut next: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (s, p) in states {
            if q < 1.0 {
                *next.entry(s.clone()).or_default() += p * (1.0 - q);
            }
            if q > 0.0 {
                for slot in 0..n {
                    let mut t = s.clone();
                    t.remove(slot);
                    t.push(k);
                    *next.entry(t).or_default() += p * q / n as f64;
                }
            }
        }
        if next.len() > cap {
            return Err(Error::SupportTooLarge { size: next.len() as f64, cap });
        }
        states = next;
    }
    Ok(states.into_iter().collect())
}

/// Elementary symmetric polynomials e_0..e_k of `w`.
fn esp(w: &[f64], k: usize) -> Vec<f64> {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &x in w {
        for j in (1..=k).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

fn odds(working: &[f64]) -> Result<Vec<f64>> {
    super::element::check_probs(working)?;
    if working.iter().any(|&p| p >= 1.0) {
        return input("working probabilities of a rejective design must be below 1");
    }
    Ok(working.iter().map(|&p| p / (1.0 - p)).collect())
}

/// Exact first-order probabilities of conditional Poisson sampling of size `n`
/// with working probabilities π̃.
pub fn rejective_pips(working: &[f64], n: usize) -> Result<Vec<f64>> {
    let w = odds(working)?;
    if n == 0 || n > w.len() {
        return input("rejective sampling needs 1 <= n <= N");
    }
    let en = esp(&w, n)[n];
    Ok((0..w.len())
        .map(|i| {
            let rest: Vec<f64> = w.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &v)| v).collect();
            w[i] * esp(&rest, n - 1)[n - 1] / en
        })
        .collect())
}

pub fn rejective_joint(working: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    let w = odds(working)?;
    let first = rejective_pips(working, n)?;
    let en = esp(&w, n)[n];
    let m = w.len();
    let mut out = vec![vec![0.0; m]; m];
    for i in 0..m {
        out[i][i] = first[i];
        for j in (i + 1)..m {
            let v = if n < 2 {
                0.0
            } else {
                let rest: Vec<f64> = w
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i && *k != j)
                    .map(|(_, &v)| v)
                    .collect();
                w[i] * w[j] * esp(&rest, n - 2)[n - 2] / en
            };
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

/// Working probabilities whose conditional-Poisson marginals match `target`
/// (fixed-point iteration on the logits, tolerance 1e-12).
pub fn rejective_working(target: &[f64], n: usize) -> Result<Vec<f64>> {
    check_fixed(target)?;
    if target.iter().any(|&p| p >= 1.0) {
        return input("extract certainty units before a rejective design");
    }
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let mut theta: Vec<f64> = target.iter().map(|&p| logit(p)).collect();
    for _ in 0..2000 {
        let work: Vec<f64> = theta.iter().map(|&t| 1.0 / (1.0 + (-t).exp())).collect();
        let marg = rejective_pips(&work, n)?;
        let err = marg.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err < 1e-12 {
            return Ok(work);
        }
        for k in 0..theta.len() {
            theta[k] += logit(target[k]) - logit(marg[k].clamp(1e-300, 1.0 - 1e-16));
        }
    }
    Err(Error::NoConvergence { iterations: 2000, detail: "rejective working probabilities".into() })
}

/// Draw Poisson samples with the working probabilities until one has size `n`.
pub fn select_rejective<R: Rng + ?Sized>(working: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    odds(working)?;
    for _ in 0..10_000_000u64 {
        let s: Vec<usize> = working.iter().enumerate().filter(|(_, &p)| unif(rng) < p).map(|(i, _)| i).collect();
        if s.len() == n {
            return Ok(s);
        }
    }
    Err(Error::NoConvergence { iterations: 10_000_000, detail: "rejective draw never hit the target size".into() })
}

/// Exact conditional-Poisson support: n-subsets with P(A) ∝ Π_{i∈A} π̃_i/(1-π̃_i).
pub fn rejective_support(working: &[f64], n: usize, cap: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let w = odds(working)?;
    let count = binom(w.len(), n);
    if count > cap as f64 {
        return Err(Error::SupportTooLarge { size: count, cap });
    }
    let en = esp(&w, n)[n];
    Ok(combinations(w.len(), n)
        .into_iter()
        .map(|s| {
            let p = s.iter().map(|&i| w[i]).product::<f64>() / en;
            (s, p)
        })
        .collect())
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

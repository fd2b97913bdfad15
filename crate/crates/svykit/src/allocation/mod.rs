//! Sample-size allocation and stratum construction.

mod boundaries;
mod rates;

pub use boundaries::*;
pub use rates::*;

use crate::error::{input, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSpec {
    /// Population count N_h.
    pub size: u64,
    /// Within-stratum standard deviation S_h.
    #[serde(default)]
    pub sd: f64,
    /// Unit cost c_h.
    #[serde(default = "one")]
    pub cost: f64,
}

fn one() -> f64 {
    1.0
}

impl StratumSpec {
    pub fn new(size: u64, sd: f64) -> Self {
        StratumSpec { size, sd, cost: 1.0 }
    }
}

/// Either a total sample size or a cost budget `C` with fixed cost `c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    SampleSize(u64),
    Cost { total: f64, fixed: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub strata: Vec<StratumSpec>,
    pub budget: Budget,
}

impl AllocationProblem {
    pub fn with_n(strata: Vec<StratumSpec>, n: u64) -> Self {
        AllocationProblem { strata, budget: Budget::SampleSize(n) }
    }

    fn validate(&self) -> Result<()> {
        if self.strata.is_empty() {
            return input("no strata");
        }
        for (h, s) in self.strata.iter().enumerate() {
            if s.size == 0 {
                return input(format!("stratum {h} has N_h = 0"));
            }
            if !(s.sd >= 0.0 && s.sd.is_finite()) {
                return input(format!("stratum {h} has invalid S_h {}", s.sd));
            }
            if !(s.cost > 0.0 && s.cost.is_finite()) {
                return input(format!("stratum {h} has invalid cost {}", s.cost));
            }
        }
        Ok(())
    }

    fn population(&self) -> u64 {
        self.strata.iter().map(|s| s.size).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub n_h: Vec<u64>,
    /// Variance of the stratified HT total under SRS within strata.
    pub variance: f64,
    /// Strata fixed at N_h (take-all) during resolution.
    pub capped: Vec<usize>,
    /// Strata held at the one-unit minimum.
    pub floored: Vec<usize>,
    /// Continuous solution before integer rounding.
    pub continuous: Vec<f64>,
}

/// `Σ N_h²/n_h (1 − n_h/N_h) S_h²`.
pub fn stratified_total_variance(strata: &[StratumSpec], n_h: &[u64]) -> f64 {
    strata
        .iter()
        .zip(n_h)
        .map(|(s, &n)| {
            let nn = s.size as f64;
            let n = n as f64;
            nn * nn / n * (1.0 - n / nn) * s.sd * s.sd
        })
        .sum()
}

fn finish(strata: &[StratumSpec], n_h: Vec<u64>, continuous: Vec<f64>, capped: Vec<usize>, floored: Vec<usize>) -> Allocation {
    let variance = stratified_total_variance(strata, &n_h);
    Allocation { n_h, variance, capped, floored, continuous }
}

/// Proportional allocation rounded with Huntington-Hill priorities
/// `N_h / √(s(s+1))`: each stratum starts with one unit and the remaining
/// seats go to the largest current priority.
pub fn proportional_allocation(problem: &AllocationProblem, n: u64) -> Result<Allocation> {
    problem.validate()?;
    let h = problem.strata.len() as u64;
    let total = problem.population();
    if n < h {
        return input(format!("n = {n} is below the number of strata {h}"));
    }
    if n > total {
        return input(format!("n = {n} exceeds the population size {total}"));
    }
    let mut n_h = vec![1u64; h as usize];
    for _ in h..n {
        let mut best = None;
        let mut best_p = f64::NEG_INFINITY;
        for (k, s) in problem.strata.iter().enumerate() {
            if n_h[k] >= s.size {
                continue;
            }
            let m = n_h[k] as f64;
            let p = s.size as f64 / (m * (m + 1.0)).sqrt();
            if p > best_p {
                best_p = p;
                best = Some(k);
            }
        }
        n_h[best.expect("population exceeds n")] += 1;
    }
    let continuous = problem.strata.iter().map(|s| n as f64 * s.size as f64 / total as f64).collect();
    let capped = (0..n_h.len()).filter(|&k| n_h[k] == problem.strata[k].size).collect();
    Ok(finish(&problem.strata, n_h, continuous, capped, Vec::new()))
}

/// What the optimal allocation minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimalTarget {
    /// Variance of the population total: n_h ∝ N_h S_h / √c_h (Neyman when costs are equal).
    #[default]
    Total,
    /// Differences of stratum means: n_h ∝ S_h / √c_h.
    MeanDifference,
}

/// Cost-optimal allocation with take-all caps resolved by fixing the capped
/// strata and re-solving for the rest.
pub fn optimal_allocation(problem: &AllocationProblem, target: OptimalTarget) -> Result<Allocation> {
    problem.validate()?;
    if problem.strata.iter().all(|s| s.sd == 0.0) {
        return input("every stratum has S_h = 0");
    }
    let q: Vec<f64> = problem
        .strata
        .iter()
        .map(|s| {
            let base = match target {
                OptimalTarget::Total => s.size as f64 * s.sd,
                OptimalTarget::MeanDifference => s.sd,
            };
            base / s.cost.sqrt()
        })
        .collect();
    let n = match problem.budget {
        Budget::SampleSize(n) => n,
        Budget::Cost { total, fixed } => {
            if !(total > fixed) {
                return input("budget does not exceed the fixed cost");
            }
            let per: f64 = problem.strata.iter().zip(&q).map(|(s, q)| q * s.cost).sum();
            let sum_q: f64 = q.iter().sum();
            ((total - fixed) * sum_q / per).floor() as u64
        }
    };
    integerize(&problem.strata, &q, n)
}

/// Power allocation `n_h ∝ N_h^α`.
pub fn power_allocation(problem: &AllocationProblem, alpha: f64, n: u64) -> Result<Allocation> {
    problem.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return input(format!("alpha = {alpha} must lie in (0,1)"));
    }
    let q: Vec<f64> = problem.strata.iter().map(|s| (s.size as f64).powf(alpha)).collect();
    integerize(&problem.strata, &q, n)
}

/// Allocate `n` proportionally to `q` subject to `1 ≤ n_h ≤ N_h`, fixing
/// violators and re-solving, then round by largest remainder.
pub fn integerize(strata: &[StratumSpec], q: &[f64], n: u64) -> Result<Allocation> {
    let h = strata.len();
    let total: u64 = strata.iter().map(|s| s.size).sum();
    if n < h as u64 {
        return input(format!("n = {n} is below the number of strata {h}"));
    }
    if n > total {
        return input(format!("n = {n} exceeds the population size {total}"));
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Fix {
        Free,
        Cap,
        Floor,
    }
    let mut fix = vec![Fix::Free; h];
    let mut cont = vec![0.0; h];
    loop {
        let fixed_n: f64 = (0..h)
            .map(|k| match fix[k] {
                Fix::Cap => strata[k].size as f64,
                Fix::Floor => 1.0,
                Fix::Free => 0.0,
            })
            .sum();
        let free: Vec<usize> = (0..h).filter(|&k| fix[k] == Fix::Free).collect();
        let rest = n as f64 - fixed_n;
        let mut weight: Vec<f64> = free.iter().map(|&k| q[k]).collect();
        if weight.iter().sum::<f64>() <= 0.0 {
            weight = free.iter().map(|&k| strata[k].size as f64).collect();
        }
        let wsum: f64 = weight.iter().sum();
        for k in 0..h {
            cont[k] = match fix[k] {
                Fix::Cap => strata[k].size as f64,
                Fix::Floor => 1.0,
                Fix::Free => 0.0,
            };
        }
        for (i, &k) in free.iter().enumerate() {
            cont[k] = rest * weight[i] / wsum;
        }
        let over: Vec<usize> = free.iter().copied().filter(|&k| cont[k] > strata[k].size as f64).collect();
        if !over.is_empty() {
            for k in over {
                fix[k] = Fix::Cap;
            }
            continue;
        }
        let under: Vec<usize> = free.iter().copied().filter(|&k| cont[k] < 1.0).collect();
        if !under.is_empty() {
            for k in under {
                fix[k] = Fix::Floor;
            }
            continue;
        }
        break;
    }
    let mut n_h: Vec<u64> = cont.iter().map(|c| c.floor() as u64).collect();
    let mut short = n - n_h.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..h).filter(|&k| fix[k] == Fix::Free).collect();
    order.sort_by(|&a, &b| {
        let ra = cont[a] - cont[a].floor();
        let rb = cont[b] - cont[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for k in order {
        if short == 0 {
            break;
        }
        if n_h[k] < strata[k].size {
            n_h[k] += 1;
            short -= 1;
        }
    }
    if short != 0 {
        return Err(Error::Numerical("largest-remainder rounding could not place every unit".into()));
    }
    let capped = (0..h).filter(|&k| fix[k] == Fix::Cap).collect();
    let floored = (0..h).filter(|&k| fix[k] == Fix::Floor).collect();
    Ok(finish(strata, n_h, cont, capped, floored))
}

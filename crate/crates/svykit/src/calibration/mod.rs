//! Calibration weighting through the convex dual.
//!
//! Two families are offered. [`Family::Divergence`] minimizes
//! `Σ d_i v_i G(ω_i/d_i)` (shifted by `g(1)` so that `ω = d` is the anchor) and
//! gives `ω_i = d_i g⁻¹(g(1) + z_iᵀλ/v_i)`. [`Family::Entropy`] minimizes
//! `Σ v_i G(ω_i)` without design weights and gives `ω_i = g⁻¹(z_iᵀλ/v_i)`;
//! it is usually paired with the debiasing column `g(d_i) v_i`.

mod entropy;

pub use entropy::{conjugate_check, default_nu_grid, ConjugateReport, Entropy};

use crate::error::{input, Error, Result};
use crate::linalg::{cross, dot, solve};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    Divergence,
    Entropy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationProblem {
    /// Base (design) weights, all positive.
    pub d: Vec<f64>,
    /// Constraint vectors, one row per unit.
    pub z: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub entropy: Entropy,
    #[serde(default)]
    pub family: Family,
    /// Working variances `v_i` (`c_i`); all ones when `None`.
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    /// Target `Σ_U g(d_i) v_i` of the debiasing column `g(d_i) v_i`, which
    /// is appended to `z` when present.
    #[serde(default)]
    pub debias_target: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Constraint residual sup-norm at which Newton stops.
    pub tol: f64,
    pub armijo: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iter: 200, tol: 1e-10, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub weights: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm of `Σ ω z − T` including any debiasing row.
    pub residual: f64,
    /// Dual objective after each accepted step, starting value first.
    pub dual_path: Vec<f64>,
    /// The constraint Gram or Hessian needed a pseudo-inverse.
    pub pseudo_inverse: bool,
}

/// Per-unit calibration in generic form: `ω_i = a_i g⁻¹(b_i + z_iᵀλ/v_i)`.
#[derive(Debug, Clone)]
pub struct DualProblem<'a> {
    pub entropy: Entropy,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub v: Vec<f64>,
    pub z: &'a [Vec<f64>],
    pub targets: &'a [f64],
}

impl CalibrationProblem {
    fn validate(&self) -> Result<()> {
        self.entropy.validate()?;
        let n = self.d.len();
        if n == 0 {
            return input("calibration needs at least one unit");
        }
        if self.z.len() != n {
            return input("z must have one row per base weight");
        }
        let p = self.targets.len();
        if let Some(i) = self.z.iter().position(|r| r.len() != p) {
            return input(format!("z row {i} has {} entries, targets have {p}", self.z[i].len()));
        }
        if let Some(i) = self.d.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
            return input(format!("base weight {i} is not positive"));
        }
        if let Some(v) = &self.v {
            if v.len() != n {
                return input("v must align with d");
            }
            if v.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return input("working variances must be positive");
            }
        }
        Ok(())
    }

    fn v_or_ones(&self) -> Vec<f64> {
        self.v.clone().unwrap_or_else(|| vec![1.0; self.d.len()])
    }

    /// Constraint rows and targets with the debiasing column appended.
    pub fn augmented(&self) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut z = self.z.clone();
        let mut t = self.targets.clone();
        if let Some(target) = self.debias_target {
            let v = self.v_or_ones();
            for (i, row) in z.iter_mut().enumerate() {
                if !self.entropy.in_domain(self.d[i]) {
                    return input(format!("base weight {} lies outside the entropy domain", self.d[i]));
                }
                row.push(self.entropy.g(self.d[i]) * v[i]);
            }
            t.push(target);
        }
        Ok((z, t))
    }
}

/// Closed-form chi-square calibration `ω_i = d_i + λᵀz_i/c_i`, with
/// `λ = (Σ z zᵀ/c)⁻¹(T − Σ d z)`. Uses `v` as `c`.
pub fn solve_chi_square(p: &CalibrationProblem) -> Result<CalibrationResult> {
    p.validate()?;
    let (z, t) = p.augmented()?;
    let c = p.v_or_ones();
    let inv_c: Vec<f64> = c.iter().map(|c| 1.0 / c).collect();
    let zero = vec![0.0; z.len()];
    let (gram, _) = cross(&z, &inv_c, &zero);
    let k = t.len();
    let mut gap = DVector::from_column_slice(&t);
    for (zi, di) in z.iter().zip(&p.d) {
        for j in 0..k {
            gap[j] -= di * zi[j];
        }
    }
    let sol = solve(&gram, &gap, false)?;
    let lambda: Vec<f64> = sol.x.iter().copied().collect();
    let weights: Vec<f64> = z
        .iter()
        .zip(&p.d)
        .zip(&inv_c)
        .map(|((zi, d), ic)| d + ic * dot(zi, &lambda))
        .collect();
    let residual = residual_norm(&weights, &z, &t);
    Ok(CalibrationResult { weights, lambda, iterations: 0, residual, dual_path: vec![], pseudo_inverse: false })
}

/// Newton's method on the dual of the chosen family.
pub fn solve_entropy(p: &CalibrationProblem, opts: &SolverOptions) -> Result<CalibrationResult> {
    p.validate()?;
    let (z, t) = p.augmented()?;
    let v = p.v_or_ones();
    let e = p.entropy;
    let n = p.d.len();
    let (dual, lambda0) = match p.family {
        Family::Divergence => {
            if !e.in_domain(1.0) {
                return input(format!("{e:?} is not defined at ω = 1 and cannot anchor on the base weights"));
            }
            let g1 = e.g(1.0);
            let dp = DualProblem { entropy: e, a: p.d.clone(), b: vec![g1; n], v, z: &z, targets: &t };
            (dp, vec![0.0; t.len()])
        }
        Family::Entropy => {
            let dp = DualProblem { entropy: e, a: vec![1.0; n], b: vec![0.0; n], v, z: &z, targets: &t };
            let l0 = if p.debias_target.is_some() {
                let mut l = vec![0.0; t.len()];
                *l.last_mut().unwrap() = 1.0;
                l
            } else {
                entropy_start(&dp, &p.d)?
            };
            (dp, l0)
        }
    };
    solve_dual(&dual, lambda0, opts)
}

/// Starting multiplier for the design-weight-free family: zero when `g⁻¹(0)`
/// exists, otherwise the least-squares fit of `zᵀλ/v` to `g(d)`.
fn entropy_start(dp: &DualProblem, d: &[f64]) -> Result<Vec<f64>> {
    let k = dp.targets.len();
    if dp.entropy.nu_valid(0.0) {
        return Ok(vec![0.0; k]);
    }
    let scaled: Vec<Vec<f64>> = dp.z.iter().zip(&dp.v).map(|(zi, vi)| zi.iter().map(|x| x / vi).collect()).collect();
    let gd: Vec<f64> = d
        .iter()
        .map(|&di| if dp.entropy.in_domain(di) { dp.entropy.g(di) } else { f64::NAN })
        .collect();
    if gd.iter().any(|x| x.is_nan()) {
        return input("base weights lie outside the entropy domain");
    }
    let ones = vec![1.0; d.len()];
    let (a, b) = cross(&scaled, &ones, &gd);
    let l = solve(&a, &b, true)?.x.iter().copied().collect::<Vec<_>>();
    let ok = scaled.iter().all(|zi| dp.entropy.nu_valid(dot(zi, &l)));
    if !ok {
        return input("no feasible starting multiplier: add an intercept or the debiasing column");
    }
    Ok(l)
}

fn residual_norm(w: &[f64], z: &[Vec<f64>], t: &[f64]) -> f64 {
    let mut r: f64 = 0.0;
    for (j, tj) in t.iter().enumerate() {
        let s: f64 = w.iter().zip(z).map(|(w, zi)| w * zi[j]).sum();
        r = r.max((s - tj).abs());
    }
    r
}

struct Eval {
    f: f64,
    grad: DVector<f64>,
    weights: Vec<f64>,
}

impl DualProblem<'_> {
    fn nu(&self, i: usize, lambda: &[f64]) -> f64 {
        self.b[i] + dot(&self.z[i], lambda) / self.v[i]
    }

    /// Dual value, gradient and weights; `None` if any ν leaves the range of g.
    fn eval(&self, lambda: &[f64]) -> Option<Eval> {
        let k = self.targets.len();
        let mut f = -dot(lambda, self.targets);
        let mut grad = -DVector::from_column_slice(self.targets);
        let mut weights = Vec::with_capacity(self.z.len());
        for i in 0..self.z.len() {
            let nu = self.nu(i, lambda);
            if !self.entropy.nu_valid(nu) {
                return None;
            }
            f += self.a[i] * self.v[i] * self.entropy.rho(nu);
            let w = self.a[i] * self.entropy.g_inv(nu);
            for j in 0..k {
                grad[j] += w * self.z[i][j];
            }
            weights.push(w);
        }
        f.is_finite().then_some(Eval { f, grad, weights })
    }

    fn hessian(&self, lambda: &[f64]) -> DMatrix<f64> {
        let k = self.targets.len();
        let mut h = DMatrix::zeros(k, k);
        for i in 0..self.z.len() {
            let nu = self.nu(i, lambda);
            let c = self.a[i] * self.entropy.rho_second(nu) / self.v[i];
            let zi = &self.z[i];
            for r in 0..k {
                for s in 0..k {
                    h[(r, s)] += c * zi[r] * zi[s];
                }
            }
        }
        h
    }
}

/// Damped Newton on `F(λ) = Σ a_i v_i ρ(b_i + z_iᵀλ/v_i) − λᵀT`, whose
/// gradient is the constraint residual `Σ ω z − T`.
pub fn solve_dual(p: &DualProblem, lambda0: Vec<f64>, opts: &SolverOptions) -> Result<CalibrationResult> {
    let n = p.z.len();
    if p.a.len() != n || p.b.len() != n || p.v.len() != n {
        return input("calibration arrays must align");
    }
    let mut lambda = lambda0;
    let mut cur = p
        .eval(&lambda)
        .ok_or_else(|| Error::Input("starting multiplier gives weights outside the entropy domain".into()))?;
    let mut path = vec![cur.f];
    let mut pinv = false;
    let scale = p.targets.iter().fold(1.0f64, |m, t| m.max(t.abs()));
    for iter in 0..=opts.max_iter {
        let res = cur.grad.amax();
        if res < opts.tol {
            return Ok(finish(cur, lambda, iter, path, pinv));
        }
        if iter == opts.max_iter {
            break;
        }
        let h = p.hessian(&lambda);
        let step = solve(&h, &(-&cur.grad), true)?;
        pinv |= step.pseudo_inverse;
        let dir = step.x;
        let slope = cur.grad.dot(&dir);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-14 {
            let trial: Vec<f64> = lambda.iter().zip(dir.iter()).map(|(l, d)| l + t * d).collect();
            if let Some(ev) = p.eval(&trial) {
                let armijo = ev.f <= cur.f + opts.armijo * t * slope;
                // Near the optimum F is flat to rounding; accept a full step
                // that shrinks the residual without raising F beyond that.
                let flat = t == 1.0
                    && ev.grad.amax() < res
                    && ev.f <= cur.f + 1e-12 * cur.f.abs().max(1.0);
                if armijo || flat {
                    accepted = Some((trial, ev));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((l, ev)) => {
                lambda = l;
                cur = ev;
                path.push(cur.f);
                if lambda.iter().any(|x| !x.is_finite() || x.abs() > 1e12 * scale) {
                    return Err(Error::NoConvergence {
                        iterations: iter + 1,
                        detail: "multipliers diverge; targets are likely infeasible".into(),
                    });
                }
            }
            None => {
                // Line search stalls only at rounding level or when the dual
                // is unbounded along the Newton direction.
                if res <= 1e-12 * scale.max(1.0) * n as f64 {
                    return Ok(finish(cur, lambda, iter, path, pinv));
                }
                return Err(Error::NoConvergence {
                    iterations: iter,
                    detail: format!("line search failed with residual {res:.3e}; targets may be infeasible"),
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        detail: format!("constraint residual {:.3e}", cur.grad.amax()),
    })
}

fn finish(cur: Eval, lambda: Vec<f64>, iterations: usize, path: Vec<f64>, pinv: bool) -> CalibrationResult {
    let residual = cur.grad.amax();
    CalibrationResult { weights: cur.weights, lambda, iterations, residual, dual_path: path, pseudo_inverse: pinv }
}

/// Divergence `Σ d v G(ω/d) − g(1) Σ v ω` (the primal objective of the
/// anchored family).
pub fn divergence_objective(e: &Entropy, d: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let g1 = e.g(1.0);
    d.iter()
        .zip(v)
        .zip(w)
        .map(|((d, v), w)| d * v * (e.G(w / d) - g1 * w / d))
        .sum()
}

/// Weights of the regression implied by the design-weight-free solution:
/// `γ̂ = (Σ z zᵀ/(g′(d) v))⁻¹ Σ z y/(g′(d) v)`.
pub fn implied_regression(p: &CalibrationProblem, y: &[f64]) -> Result<Vec<f64>> {
    p.validate()?;
    let (z, _) = p.augmented()?;
    let v = p.v_or_ones();
    let w: Vec<f64> = p.d.iter().zip(&v).map(|(d, v)| 1.0 / (p.entropy.g_prime(*d) * v)).collect();
    let (a, b) = cross(&z, &w, y);
    Ok(solve(&a, &b, true)?.x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::regression_fit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn fixture(n: usize, k: usize, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(2.0..6.0)).collect();
        let z: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut r = vec![1.0];
                r.extend((1..k).map(|_| rng.random_range(0.0..2.0)));
                r
            })
            .collect();
        let mut t = vec![0.0; k];
        for (zi, di) in z.iter().zip(&d) {
            for j in 0..k {
                t[j] += di * zi[j];
            }
        }
        for (j, tj) in t.iter_mut().enumerate() {
            *tj *= 1.0 + 0.03 * (j as f64 + 1.0) * if j % 2 == 0 { 1.0 } else { -1.0 };
        }
        (d, z, t)
    }

    fn problem(e: Entropy, family: Family) -> CalibrationProblem {
        let (d, z, t) = fixture(200, 5, 11);
        CalibrationProblem { d, z, targets: t, entropy: e, family, v: None, debias_target: None }
    }

    #[test]
    fn chi_square_single_total() {
        let d = vec![2.0, 3.0, 5.0];
        let c = vec![1.0, 2.0, 4.0];
        let n_pop = 12.0;
        let p = CalibrationProblem {
            d: d.clone(),
            z: vec![vec![1.0]; 3],
            targets: vec![n_pop],
            entropy: Entropy::Squared,
            family: Family::Divergence,
            v: Some(c.clone()),
            debias_target: None,
        };
        let r = solve_chi_square(&p).unwrap();
        let sum_inv: f64 = c.iter().map(|c| 1.0 / c).sum();
        for i in 0..3 {
            let want = d[i] + (n_pop - 10.0) / sum_inv / c[i];
            assert!((r.weights[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn chi_square_met_targets_keep_base_weights() {
        let (d, z, _) = fixture(30, 3, 2);
        let mut t = vec![0.0; 3];
        for (zi, di) in z.iter().zip(&d) {
            for j in 0..3 {
                t[j] += di * zi[j];
            }
        }
        let p = CalibrationProblem { d: d.clone(), z, targets: t, entropy: Entropy::Squared, family: Family::Divergence, v: None, debias_target: None };
        let r = solve_chi_square(&p).unwrap();
        assert!(r.lambda.iter().all(|l| l.abs() < 1e-12));
        for (w, d) in r.weights.iter().zip(&d) {
            assert!((w - d).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_square_equals_greg_weights() {
        let (d, z, t) = fixture(50, 3, 5);
        let c: Vec<f64> = (0..50).map(|i| 1.0 + (i % 4) as f64).collect();
        let p = CalibrationProblem { d: d.clone(), z: z.clone(), targets: t.clone(), entropy: Entropy::Squared, family: Family::Divergence, v: Some(c.clone()), debias_target: None };
        let r = solve_chi_square(&p).unwrap();
        // GREG weights d + d xᵀλ/c_g coincide when c_g = d c.
        let cg: Vec<f64> = d.iter().zip(&c).map(|(d, c)| d * c).collect();
        let fit = regression_fit(&d, &vec![0.0; 50], &z, &t, &cg, false).unwrap();
        for (a, b) in r.weights.iter().zip(&fit.weights) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn divergence_squared_is_greg() {
        let p = problem(Entropy::Squared, Family::Divergence);
        let r = solve_entropy(&p, &SolverOptions::default()).unwrap();
        let fit = regression_fit(&p.d, &vec![0.0; 200], &p.z, &p.targets, &vec![1.0; 200], false).unwrap();
        for (a, b) in r.weights.iter().zip(&fit.weights) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(r.iterations <= 2);
    }

    #[test]
    fn every_entropy_meets_constraints() {
        for e in Entropy::all() {
            let fam = if e.in_domain(1.0) { Family::Divergence } else { Family::Entropy };
            let mut p = problem(e, fam);
            if fam == Family::Entropy {
                p.d.iter_mut().for_each(|d| *d += 1.0);
            }
            let r = solve_entropy(&p, &SolverOptions::default()).unwrap_or_else(|err| panic!("{e:?}: {err}"));
            assert!(r.residual < 1e-9, "{e:?} residual {}", r.residual);
            // Rényi with α > 0 has no barrier at zero, so weights may vanish.
            assert!(r.weights.iter().all(|w| *w >= 0.0 || e.domain().0 == f64::NEG_INFINITY), "{e:?}");
        }
    }

    #[test]
    fn kl_single_total_is_ratio_adjustment() {
        let d = vec![1.5, 2.0, 4.0, 2.5];
        let p = CalibrationProblem {
            d: d.clone(),
            z: vec![vec![1.0]; 4],
            targets: vec![13.0],
            entropy: Entropy::KullbackLeibler,
            family: Family::Divergence,
            v: None,
            debias_target: None,
        };
        let r = solve_entropy(&p, &SolverOptions::default()).unwrap();
        let f = 13.0 / 10.0;
        for (w, d) in r.weights.iter().zip(&d) {
            assert!((w - d * f).abs() < 1e-12);
        }
    }

    #[test]
    fn met_targets_converge_immediately() {
        for e in Entropy::all().into_iter().filter(|e| e.in_domain(1.0)) {
            let (d, z, _) = fixture(40, 3, 9);
            let mut t = vec![0.0; 3];
            for (zi, di) in z.iter().zip(&d) {
                for j in 0..3 {
                    t[j] += di * zi[j];
                }
            }
            let p = CalibrationProblem { d: d.clone(), z, targets: t, entropy: e, family: Family::Divergence, v: None, debias_target: None };
            let r = solve_entropy(&p, &SolverOptions::default()).unwrap();
            assert_eq!(r.iterations, 0, "{e:?}");
            assert!(r.weights.iter().zip(&d).all(|(w, d)| (w - d).abs() < 1e-12));
        }
    }

    #[test]
    fn debias_start_is_base_weights() {
        // Targets equal to the sample sums make ω = d the solution.
        for e in [Entropy::EmpiricalLikelihood, Entropy::Squared, Entropy::Hellinger, Entropy::CrossEntropy] {
            let (mut d, z, _) = fixture(40, 2, 4);
            d.iter_mut().for_each(|x| *x += 1.0);
            let mut t = vec![0.0; 2];
            for (zi, di) in z.iter().zip(&d) {
                for j in 0..2 {
                    t[j] += di * zi[j];
                }
            }
            let gsum: f64 = d.iter().map(|di| di * e.g(*di)).sum();
            let p = CalibrationProblem { d: d.clone(), z, targets: t, entropy: e, family: Family::Entropy, v: None, debias_target: Some(gsum) };
            let r = solve_entropy(&p, &SolverOptions::default()).unwrap();
            assert_eq!(r.iterations, 0);
            assert!(r.weights.iter().zip(&d).all(|(w, d)| (w - d).abs() < 1e-9 * d));
        }
    }

    #[test]
    fn el_weights_positive() {
        let (d, z, t) = fixture(60, 3, 21);
        let p = CalibrationProblem { d, z, targets: t, entropy: Entropy::EmpiricalLikelihood, family: Family::Entropy, v: None, debias_target: None };
        let r = solve_entropy(&p, &SolverOptions::default()).unwrap();
        assert!(r.weights.iter().all(|w| *w > 0.0));
        assert!(r.residual < 1e-9);
    }

    #[test]
    fn dual_decreases() {
        for e in Entropy::all().into_iter().filter(|e| e.in_domain(1.0)) {
            let r = solve_entropy(&problem(e, Family::Divergence), &SolverOptions::default()).unwrap();
            for w in r.dual_path.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{e:?}");
            }
        }
    }

    #[test]
    fn infeasible_targets_error() {
        // Positive weights cannot produce a negative total.
        let p = CalibrationProblem {
            d: vec![1.0, 2.0],
            z: vec![vec![1.0], vec![1.0]],
            targets: vec![-1.0],
            entropy: Entropy::KullbackLeibler,
            family: Family::Divergence,
            v: None,
            debias_target: None,
        };
        assert!(matches!(solve_entropy(&p, &SolverOptions::default()), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn divergence_family_rejects_shifted_domains() {
        let p = problem(Entropy::CrossEntropy, Family::Divergence);
        assert!(matches!(solve_entropy(&p, &SolverOptions::default()), Err(Error::Input(_))));
    }

    #[test]
    fn debiased_fit_has_zero_weighted_residual() {
        // Exact when d g′(d) lies in the span of (x, g(d)).
        let (mut d, z, t) = fixture(80, 2, 33);
        d.iter_mut().for_each(|x| *x += 1.0);
        let y: Vec<f64> = z.iter().map(|r| 3.0 + 2.0 * r[1] + r[1] * r[1]).collect();
        for e in [Entropy::Squared, Entropy::EmpiricalLikelihood, Entropy::Hellinger, Entropy::Inverse, Entropy::Renyi { alpha: 0.5 }, Entropy::KullbackLeibler] {
            let p = CalibrationProblem { d: d.clone(), z: z.clone(), targets: t.clone(), entropy: e, family: Family::Entropy, v: None, debias_target: Some(0.0) };
            let gamma = implied_regression(&p, &y).unwrap();
            let (za, _) = p.augmented().unwrap();
            let s: f64 = za.iter().zip(&y).zip(&d).map(|((zi, yi), di)| di * (yi - dot(zi, &gamma))).sum();
            assert!(s.abs() < 1e-8 * y.iter().sum::<f64>(), "{e:?}: {s}");
        }
    }
}

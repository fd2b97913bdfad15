//! Generalized entropies and their convex conjugates.
//!
//! Every entropy is a strictly convex `G` on an open interval `𝒱`, with
//! `g = G′`, the inverse `g⁻¹`, and the conjugate `ρ(ν) = ν g⁻¹(ν) − G(g⁻¹(ν))`
//! so that `ρ′ = g⁻¹` and `ρ″ = 1/G″(g⁻¹)`.

use crate::error::{input, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum Entropy {
    Squared,
    KullbackLeibler,
    ShiftedKl,
    EmpiricalLikelihood,
    ExponentialTilting,
    CrossEntropy,
    Hellinger,
    SquaredHellinger,
    PseudoHuber {
        #[serde(default = "one")]
        m: f64,
    },
    Inverse,
    Renyi { alpha: f64 },
}

fn one() -> f64 {
    1.0
}

impl Entropy {
    /// All entropies with default parameters (Rényi at α = 2).
    pub fn all() -> Vec<Entropy> {
        use Entropy::*;
        vec![
            Squared,
            KullbackLeibler,
            ShiftedKl,
            EmpiricalLikelihood,
            ExponentialTilting,
            CrossEntropy,
            Hellinger,
            SquaredHellinger,
            PseudoHuber { m: 1.0 },
            Inverse,
            Renyi { alpha: 2.0 },
        ]
    }

    /// Parse a CLI name such as `kl`, `pseudo_huber:2` or `renyi:0.5`.
    pub fn parse(s: &str) -> Result<Entropy> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |default: Option<f64>| -> Result<f64> {
            match arg {
                Some(a) => a.trim().parse::<f64>().or_else(|_| input(format!("bad entropy parameter '{a}'"))),
                None => default.map_or_else(|| input(format!("entropy '{name}' needs a parameter")), Ok),
            }
        };
        let e = match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "squared" | "chi_square" | "squared_loss" => Entropy::Squared,
            "kl" | "kullback_leibler" => Entropy::KullbackLeibler,
            "shifted_kl" => Entropy::ShiftedKl,
            "el" | "empirical_likelihood" => Entropy::EmpiricalLikelihood,
            "et" | "exponential_tilting" => Entropy::ExponentialTilting,
            "cross_entropy" => Entropy::CrossEntropy,
            "hellinger" => Entropy::Hellinger,
            "squared_hellinger" => Entropy::SquaredHellinger,
            "pseudo_huber" => Entropy::PseudoHuber { m: num(Some(1.0))? },
            "inverse" => Entropy::Inverse,
            "renyi" => Entropy::Renyi { alpha: num(None)? },
            _ => return input(format!("unknown entropy '{s}'")),
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Entropy::PseudoHuber { m } if !(m > 0.0 && m.is_finite()) => input("pseudo-Huber M must be positive"),
            Entropy::Renyi { alpha } if !alpha.is_finite() || alpha == 0.0 || alpha == -1.0 => {
                input("Rényi α must be finite and not 0 or −1")
            }
            _ => Ok(()),
        }
    }

    /// Open domain `𝒱` of `G`.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Entropy::Squared | Entropy::PseudoHuber { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Entropy::ShiftedKl | Entropy::CrossEntropy => (1.0, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn in_domain(&self, w: f64) -> bool {
        let (lo, hi) = self.domain();
        w > lo && w < hi
    }

    /// Open range of `g` over `𝒱`, which is the domain of `g⁻¹` and `ρ`.
    /// For Rényi with α > 0 the conjugate is finite everywhere: below zero
    /// it is the constant 0 reached by ω → 0, so the whole line is returned.
    pub fn nu_range(&self) -> (f64, f64) {
        use Entropy::*;
        match *self {
            Squared | KullbackLeibler | ExponentialTilting | ShiftedKl => (f64::NEG_INFINITY, f64::INFINITY),
            EmpiricalLikelihood | CrossEntropy | Hellinger | Inverse => (f64::NEG_INFINITY, 0.0),
            SquaredHellinger => (f64::NEG_INFINITY, 1.0),
            PseudoHuber { m } => (-m, m),
            Renyi { alpha } if alpha > 0.0 => (f64::NEG_INFINITY, f64::INFINITY),
            Renyi { .. } => (f64::NEG_INFINITY, 0.0),
        }
    }

    pub fn nu_valid(&self, nu: f64) -> bool {
        let (lo, hi) = self.nu_range();
        nu.is_finite() && nu > lo && nu < hi
    }

    #[allow(non_snake_case)]
    pub fn G(&self, w: f64) -> f64 {
        use Entropy::*;
        match *self {
            Squared => w * w / 2.0,
            KullbackLeibler => w * w.ln(),
            ExponentialTilting => w * w.ln() - w,
            ShiftedKl => (w - 1.0) * ((w - 1.0).ln() - 1.0),
            EmpiricalLikelihood => -w.ln(),
            CrossEntropy => (w - 1.0) * (w - 1.0).ln() - w * w.ln(),
            Hellinger => -4.0 * w.sqrt(),
            SquaredHellinger => (w.sqrt() - 1.0).powi(2),
            PseudoHuber { m } => m * m * (1.0 + (w / m).powi(2)).sqrt(),
            Inverse => 1.0 / (2.0 * w),
            Renyi { alpha } => w.powf(alpha + 1.0) / (alpha * (alpha + 1.0)),
        }
    }

    /// `g = G′`.
    pub fn g(&self, w: f64) -> f64 {
        use Entropy::*;
        match *self {
            Squared => w,
            KullbackLeibler => w.ln() + 1.0,
            ExponentialTilting => w.ln(),
            ShiftedKl => (w - 1.0).ln(),
            EmpiricalLikelihood => -1.0 / w,
            CrossEntropy => (1.0 - 1.0 / w).ln(),
            Hellinger => -2.0 / w.sqrt(),
            SquaredHellinger => 1.0 - 1.0 / w.sqrt(),
            PseudoHuber { m } => w / (1.0 + (w / m).powi(2)).sqrt(),
            Inverse => -1.0 / (2.0 * w * w),
            Renyi { alpha } => w.powf(alpha) / alpha,
        }
    }

    /// `G″`, positive on the domain.
    pub fn g_prime(&self, w: f64) -> f64 {
        use Entropy::*;
        match *self {
            Squared => 1.0,
            KullbackLeibler | ExponentialTilting => 1.0 / w,
            ShiftedKl => 1.0 / (w - 1.0),
            EmpiricalLikelihood => 1.0 / (w * w),
            CrossEntropy => 1.0 / (w * (w - 1.0)),
            Hellinger => w.powf(-1.5),
            SquaredHellinger => 0.5 * w.powf(-1.5),
            PseudoHuber { m } => (1.0 + (w / m).powi(2)).powf(-1.5),
            Inverse => w.powi(-3),
            Renyi { alpha } => w.powf(alpha - 1.0),
        }
    }

    /// `g⁻¹(ν)`; NaN outside the range of `g`.
    pub fn g_inv(&self, nu: f64) -> f64 {
        if !self.nu_valid(nu) {
            return f64::NAN;
        }
        use Entropy::*;
        match *self {
            Squared => nu,
            KullbackLeibler => (nu - 1.0).exp(),
            ExponentialTilting => nu.exp(),
            ShiftedKl => 1.0 + nu.exp(),
            EmpiricalLikelihood => -1.0 / nu,
            CrossEntropy => -1.0 / nu.exp_m1(),
            Hellinger => 4.0 / (nu * nu),
            SquaredHellinger => (1.0 - nu).powi(-2),
            PseudoHuber { m } => nu / (1.0 - (nu / m).powi(2)).sqrt(),
            Inverse => 1.0 / (-2.0 * nu).sqrt(),
            Renyi { alpha } if alpha > 0.0 && nu <= 0.0 => 0.0,
            Renyi { alpha } => (alpha * nu).powf(1.0 / alpha),
        }
    }

    /// Convex conjugate `ρ(ν)`; +∞ outside the range of `g`.
    pub fn rho(&self, nu: f64) -> f64 {
        if !self.nu_valid(nu) {
            return f64::INFINITY;
        }
        use Entropy::*;
        match *self {
            Squared => nu * nu / 2.0,
            KullbackLeibler => (nu - 1.0).exp(),
            ExponentialTilting => nu.exp(),
            ShiftedKl => nu + nu.exp(),
            EmpiricalLikelihood => -1.0 - (-nu).ln(),
            CrossEntropy => nu - (-nu.exp_m1()).ln(),
            Hellinger => -4.0 / nu,
            SquaredHellinger => nu / (1.0 - nu),
            PseudoHuber { m } => -m * m * (1.0 - (nu / m).powi(2)).sqrt(),
            Inverse => -(-2.0 * nu).sqrt(),
            Renyi { alpha } if alpha > 0.0 && nu <= 0.0 => 0.0,
            Renyi { alpha } => (alpha * nu).powf((alpha + 1.0) / alpha) / (alpha + 1.0),
        }
    }

    /// `ρ′ = g⁻¹`.
    pub fn rho_prime(&self, nu: f64) -> f64 {
        self.g_inv(nu)
    }

    /// `ρ″(ν) = 1/G″(g⁻¹(ν))`.
    pub fn rho_second(&self, nu: f64) -> f64 {
        let w = self.g_inv(nu);
        if w.is_nan() {
            return f64::NAN;
        }
        if w == 0.0 {
            return 0.0;
        }
        1.0 / self.g_prime(w)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConjugateReport {
    pub points: usize,
    /// Points of the grid outside the range of `g`, skipped.
    pub skipped: usize,
    /// max |ρ′(g(ω)) − ω| / max(1, |ω|) over ω = g⁻¹(ν).
    pub inverse_error: f64,
    /// max |ρ(ν) − (ν g⁻¹(ν) − G(g⁻¹(ν)))| / max(1, |ρ(ν)|).
    pub conjugate_error: f64,
}

impl ConjugateReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.inverse_error <= tol && self.conjugate_error <= tol
    }
}

/// Check `ρ′∘g = id` and the Legendre identity on a grid of ν values.
pub fn conjugate_check(e: &Entropy, nu_grid: &[f64]) -> ConjugateReport {
    let mut rep = ConjugateReport { points: 0, skipped: 0, inverse_error: 0.0, conjugate_error: 0.0 };
    for &nu in nu_grid {
        if !e.nu_valid(nu) {
            rep.skipped += 1;
            continue;
        }
        let w = e.g_inv(nu);
        let back = e.rho_prime(e.g(w));
        let ie = (back - w).abs() / w.abs().max(1.0);
        let r = e.rho(nu);
        let ce = (r - (nu * w - e.G(w))).abs() / r.abs().max(1.0);
        rep.inverse_error = rep.inverse_error.max(if ie.is_nan() { f64::INFINITY } else { ie });
        rep.conjugate_error = rep.conjugate_error.max(if ce.is_nan() { f64::INFINITY } else { ce });
        rep.points += 1;
    }
    rep
}

/// `n` interior points of the ν range obtained as `g(ω)` on a grid of
/// weights spread over `𝒱` 20 units wide just above the lower end of the domain.
pub fn default_nu_grid(e: &Entropy, n: usize) -> Vec<f64> {
    let (lo, _) = e.domain();
    let base = if lo.is_finite() { lo } else { -10.0 };
    (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) / n as f64;
            let w = base + 0.05 + t * 20.0;
            e.g(w)
        })
        .filter(|nu| e.nu_valid(*nu))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugacy_holds_on_grid() {
        for e in Entropy::all().into_iter().chain([Entropy::Renyi { alpha: -0.5 }, Entropy::Renyi { alpha: -2.0 }, Entropy::PseudoHuber { m: 3.0 }]) {
            let grid = default_nu_grid(&e, 100);
            assert_eq!(grid.len(), 100, "{e:?}");
            let rep = conjugate_check(&e, &grid);
            assert!(rep.passes(1e-10), "{e:?}: {rep:?}");
        }
    }

    #[test]
    fn table_rows() {
        let e = Entropy::Squared;
        assert_eq!(e.rho(3.0), 4.5);
        assert_eq!(e.rho_prime(3.0), 3.0);
        let el = Entropy::EmpiricalLikelihood;
        assert!((el.rho(-2.0) - (-1.0 - 2f64.ln())).abs() < 1e-15);
        // ρ′ = −1/ν, the derivative of −1 − log(−ν).
        assert!((el.rho_prime(-2.0) - 0.5).abs() < 1e-15);
        let sk = Entropy::ShiftedKl;
        assert!((sk.rho(0.3) - (0.3 + 0.3f64.exp())).abs() < 1e-15);
        let sh = Entropy::SquaredHellinger;
        assert!((sh.rho(0.5) - 1.0).abs() < 1e-15);
        assert!((sh.rho_prime(0.5) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_covariates_match_table() {
        let pi: f64 = 0.25;
        let d = 1.0 / pi;
        let cases = [
            (Entropy::Squared, d),
            (Entropy::EmpiricalLikelihood, -pi),
            (Entropy::ExponentialTilting, -pi.ln()),
            (Entropy::CrossEntropy, (1.0 - pi).ln()),
            (Entropy::Hellinger, -2.0 * pi.sqrt()),
            (Entropy::PseudoHuber { m: 2.0 }, d / (1.0 + (2.0 * pi).powi(-2)).sqrt()),
            (Entropy::Inverse, -pi * pi / 2.0),
            (Entropy::Renyi { alpha: 0.5 }, pi.powf(-0.5) / 0.5),
        ];
        for (e, want) in cases {
            assert!((e.g(d) - want).abs() < 1e-14, "{e:?}");
        }
    }

    #[test]
    fn numeric_derivatives() {
        for e in Entropy::all() {
            let w = e.domain().0.max(0.0) + 1.7;
            let h = 1e-5;
            let dg = (e.G(w + h) - e.G(w - h)) / (2.0 * h);
            assert!((dg - e.g(w)).abs() < 1e-7, "{e:?} g");
            let d2 = (e.g(w + h) - e.g(w - h)) / (2.0 * h);
            assert!((d2 - e.g_prime(w)).abs() < 1e-7, "{e:?} g'");
            assert!(e.g_prime(w) > 0.0);
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!(Entropy::parse("kl").unwrap(), Entropy::KullbackLeibler);
        assert_eq!(Entropy::parse("pseudo-huber").unwrap(), Entropy::PseudoHuber { m: 1.0 });
        assert_eq!(Entropy::parse("renyi:0.5").unwrap(), Entropy::Renyi { alpha: 0.5 });
        assert!(Entropy::parse("renyi:-1").is_err());
        assert!(Entropy::parse("renyi").is_err());
        assert!(Entropy::parse("nope").is_err());
    }
}

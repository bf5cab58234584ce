//! Limiting spectral distributions: Marchenko–Pastur, Wigner semicircle and
//! the F-matrix law, with support edges and extreme-eigenvalue limits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

const CDF_ABS_TOL: f64 = 1e-11;
const INTEGRAL_ABS_TOL: f64 = 1e-8;

/// A limiting spectral distribution: a continuous part with square-root edges
/// on `support()` plus an optional atom at zero.
pub trait LimitLaw {
    /// Density of the continuous part (zero off-support).
    fn pdf(&self, x: f64) -> f64;
    /// Right-continuous CDF including any atom.
    fn cdf(&self, x: f64) -> f64;
    /// Edges `(a, b)` of the continuous part.
    fn support(&self) -> (f64, f64);
    /// Mass of the atom at zero.
    fn atom_at_zero(&self) -> f64 {
        0.0
    }
    /// Left limit `F(x−)`.
    fn cdf_left(&self, x: f64) -> f64 {
        if x == 0.0 {
            self.cdf(x) - self.atom_at_zero()
        } else {
            self.cdf(x)
        }
    }
    /// Smallest `x` with `F(x) ≥ u`, by bisection on the support.
    fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(format!("quantile level {u} outside [0, 1]")));
        }
        if u <= self.atom_at_zero() && self.atom_at_zero() > 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = self.support();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) >= u {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi.abs().max(1.0) {
                break;
            }
        }
        Ok(hi)
    }
}

/// `∫_a^upper √((b−t)(t−a)) h(t) dt` via `t = a + (b−a) sin²θ`, which removes both
/// square-root edge singularities.
fn sqrt_edge_integral<H: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    upper: f64,
    h: H,
    abs_tol: f64,
) -> Result<f64> {
    if upper <= a {
        return Ok(0.0);
    }
    let w = b - a;
    let theta_max = if upper >= b {
        PI / 2.0
    } else {
        ((upper - a) / w).sqrt().asin()
    };
    let integrand = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let s2 = s * s;
        2.0 * w * w * s2 * c * c * h(a + w * s2)
    };
    Ok(quad::integrate(integrand, 0.0, theta_max, abs_tol, 1e-12)?.value)
}

/// Marchenko–Pastur law with ratio `γ = p/n` and entry variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpLaw {
    pub gamma: f64,
    pub sigma2: f64,
}

impl MpLaw {
    pub fn new(gamma: f64, sigma2: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Parameter(format!("MP ratio must be positive, got {gamma}")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Parameter(format!("MP variance must be positive, got {sigma2}")));
        }
        Ok(Self { gamma, sigma2 })
    }

    pub fn standard(gamma: f64) -> Result<Self> {
        Self::new(gamma, 1.0)
    }

    /// Weight of the continuous part.
    pub fn continuous_mass(&self) -> f64 {
        if self.gamma > 1.0 {
            1.0 / self.gamma
        } else {
            1.0
        }
    }

    /// Density of the continuous part after removing the `σ²` factor:
    /// `√((b−x)(x−a)) / (2πγx)` on the unit-variance edges. For `γ > 1` this is
    /// the same expression as `(1/γ)·f_{1/γ}(x/γ)/γ`.
    fn pdf_unit(&self, x: f64) -> f64 {
        let g = self.gamma;
        let (a, b) = ((1.0 - g.sqrt()).powi(2), (1.0 + g.sqrt()).powi(2));
        if x <= a || x >= b || x <= 0.0 {
            return 0.0;
        }
        ((b - x) * (x - a)).sqrt() / (2.0 * PI * g * x)
    }
}

impl LimitLaw for MpLaw {
    fn pdf(&self, x: f64) -> f64 {
        self.pdf_unit(x / self.sigma2) / self.sigma2
    }

    fn cdf(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        let atom = if x >= 0.0 { self.atom_at_zero() } else { 0.0 };
        if x < a {
            return atom;
        }
        if x >= b {
            return 1.0;
        }
        let g = self.gamma;
        let (ua, ub) = (a / self.sigma2, b / self.sigma2);
        let cont = sqrt_edge_integral(
            ua,
            ub,
            x / self.sigma2,
            |t| 1.0 / (2.0 * PI * g * t),
            CDF_ABS_TOL,
        )
        .unwrap_or(f64::NAN);
        (atom + cont).clamp(0.0, 1.0)
    }

    fn support(&self) -> (f64, f64) {
        let r = self.gamma.sqrt();
        ((1.0 - r).powi(2) * self.sigma2, (1.0 + r).powi(2) * self.sigma2)
    }

    fn atom_at_zero(&self) -> f64 {
        if self.gamma > 1.0 {
            1.0 - 1.0 / self.gamma
        } else {
            0.0
        }
    }
}

/// Standard Wigner semicircle law on `[−2, 2]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SemicircleLaw;

impl LimitLaw for SemicircleLaw {
    fn pdf(&self, x: f64) -> f64 {
        if x.abs() >= 2.0 {
            0.0
        } else {
            (4.0 - x * x).sqrt() / (2.0 * PI)
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= -2.0 {
            0.0
        } else if x >= 2.0 {
            1.0
        } else {
            0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
        }
    }

    fn support(&self) -> (f64, f64) {
        (-2.0, 2.0)
    }
}

/// Limiting spectral law of `S₂⁻¹S₁` for independent white sample covariances
/// with ratios `γ₁ = p/n₁` (numerator) and `γ₂ = p/n₂ < 1` (denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FMatrixLsd {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl FMatrixLsd {
    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(gamma1 > 0.0 && gamma1.is_finite()) {
            return Err(Error::Parameter(format!("gamma1 must be positive, got {gamma1}")));
        }
        if !(gamma2 > 0.0 && gamma2 < 1.0) {
            return Err(Error::Parameter(format!("gamma2 must lie in (0, 1), got {gamma2}")));
        }
        Ok(Self { gamma1, gamma2 })
    }

    /// `h = √(γ₁ + γ₂ − γ₁γ₂)`.
    pub fn h(&self) -> f64 {
        (self.gamma1 + self.gamma2 - self.gamma1 * self.gamma2).sqrt()
    }

    /// Density times `√((b−x)(x−a))⁻¹`.
    fn weight(&self, x: f64) -> f64 {
        (1.0 - self.gamma2) / (2.0 * PI * x * (self.gamma1 + self.gamma2 * x))
    }

    pub fn continuous_mass(&self) -> f64 {
        if self.gamma1 > 1.0 {
            1.0 / self.gamma1
        } else {
            1.0
        }
    }
}

impl LimitLaw for FMatrixLsd {
    fn pdf(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a || x >= b {
            return 0.0;
        }
        ((b - x) * (x - a)).sqrt() * self.weight(x)
    }

    fn cdf(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        let atom = if x >= 0.0 { self.atom_at_zero() } else { 0.0 };
        if x < a {
            return atom;
        }
        if x >= b {
            return 1.0;
        }
        let cont = sqrt_edge_integral(a, b, x, |t| self.weight(t), CDF_ABS_TOL).unwrap_or(f64::NAN);
        (atom + cont).clamp(0.0, 1.0)
    }

    fn support(&self) -> (f64, f64) {
        let h = self.h();
        let d = 1.0 - self.gamma2;
        (((1.0 - h) / d).powi(2), ((1.0 + h) / d).powi(2))
    }

    fn atom_at_zero(&self) -> f64 {
        if self.gamma1 > 1.0 {
            1.0 - 1.0 / self.gamma1
        } else {
            0.0
        }
    }
}

/// `∫ g dF` over the continuous part of the F-matrix law (absolute tolerance 1e−8).
pub fn f_lsd_integral<G: Fn(f64) -> f64>(law: &FMatrixLsd, g: G) -> Result<f64> {
    let (a, b) = law.support();
    sqrt_edge_integral(a, b, b, |t| g(t) * law.weight(t), INTEGRAL_ABS_TOL * 1e-2)
}

/// Almost-sure limits of the extreme sample eigenvalues under an MP law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremeLimits {
    /// `(1 − √γ)² σ²`, unavailable when `γ ≥ 1`.
    pub lambda_min: Option<f64>,
    /// `(1 + √γ)² σ²`.
    pub lambda_max: f64,
}

pub fn extreme_eigen_limits(law: &MpLaw) -> ExtremeLimits {
    let (a, b) = law.support();
    ExtremeLimits {
        lambda_min: (law.gamma < 1.0).then_some(a),
        lambda_max: b,
    }
}

/// Evaluates a density on `points` equally spaced points spanning `[lo, hi]`.
pub fn density_curve<L: LimitLaw + ?Sized>(
    law: &L,
    lo: f64,
    hi: f64,
    points: usize,
) -> Vec<(f64, f64)> {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            (x, law.pdf(x))
        })
        .collect()
}

//! Covariance changepoints from the eigenvalue-ratio deviance
//! `T(A, B) = Σ (1 − λ_j)² + (1 − 1/λ_j)²`, `λ_j` the eigenvalues of `B⁻¹A`,
//! and recursive binary segmentation on its normalized form.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{f_lsd_integral, FMatrixLsd};
use crate::normal;
use crate::sampling::{fill_standard_normal, stream_rng};
use crate::spectral::{cholesky_factor, generalized_eigenvalues, symmetrize, DataMatrix, Spectrum};

/// `f*(x) = (1 − x)² + (1 − 1/x)²`.
pub fn f_star(x: f64) -> f64 {
    (1.0 - x).powi(2) + (1.0 - 1.0 / x).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioDeviance {
    pub value: f64,
    pub p: usize,
    pub eigenvalues_of_ratio: Spectrum,
}

/// `T(A, B)` through the symmetric reduction `L⁻¹AL⁻ᵀ`, `B = LLᵀ`.
pub fn ratio_deviance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<RatioDeviance> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::Input(format!(
            "ratio deviance needs square matrices of one size, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    cholesky_factor(a)?;
    let eig = generalized_eigenvalues(a, b)?;
    let value = eig.eigenvalues().iter().map(|&l| f_star(l)).sum();
    Ok(RatioDeviance { value, p: a.nrows(), eigenvalues_of_ratio: eig })
}

/// Which formulas supply `μ(γ)` and `σ²(γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantsReading {
    /// Contour-integral mean and variance of the real Gaussian F-matrix CLT,
    /// evaluated through the Laurent coefficients of `f*(z(ξ))`.
    #[default]
    Contour,
    /// Closed forms taken literally, with
    /// `K₂,₁ = 2h(1+h²)/((1−γ₂)⁴ − 2h/(1−γ₂)²)`.
    PrintedA,
    /// Closed forms with `K₂,₁ = 2h(1+h²)/(1−γ₂)⁴ − 2h/(1−γ₂)²`, the same
    /// grouping as `K₂,₂`.
    PrintedB,
}

impl ConstantsReading {
    pub const ALL: [ConstantsReading; 3] =
        [ConstantsReading::Contour, ConstantsReading::PrintedA, ConstantsReading::PrintedB];

    pub fn name(self) -> &'static str {
        match self {
            ConstantsReading::Contour => "contour",
            ConstantsReading::PrintedA => "printed-a",
            ConstantsReading::PrintedB => "printed-b",
        }
    }
}

impl std::str::FromStr for ConstantsReading {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown constants reading '{s}'")))
    }
}

/// Null centering and scale of `T(S₁, S₂)` for `p` columns and segment
/// lengths `n1`, `n2`, with every intermediate constant kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevianceConstants {
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub h: f64,
    pub a: f64,
    pub b: f64,
    pub k21: f64,
    pub k22: f64,
    pub k31: f64,
    pub k32: f64,
    pub j1: f64,
    pub j2: f64,
    /// `∫ f* dF_γ`.
    pub centering_integral: f64,
    pub reading: ConstantsReading,
    pub mu_gamma: f64,
    pub sigma2_gamma: f64,
    pub mu_contour: f64,
    pub sigma2_contour: f64,
    pub mu_printed_a: f64,
    pub sigma2_printed_a: f64,
    pub mu_printed_b: f64,
    pub sigma2_printed_b: f64,
}

impl DevianceConstants {
    pub fn sigma(&self) -> Result<f64> {
        if self.sigma2_gamma > 0.0 && self.sigma2_gamma.is_finite() {
            Ok(self.sigma2_gamma.sqrt())
        } else {
            Err(Error::Numerical {
                message: format!(
                    "{} reading gives sigma^2 = {:e} at gamma = ({}, {}); no valid normalization",
                    self.reading.name(),
                    self.sigma2_gamma,
                    self.gamma1,
                    self.gamma2
                ),
                iterations: 0,
            })
        }
    }

    /// `(T − p ∫f* dF_γ − μ(γ)) / σ(γ)`.
    pub fn normalize(&self, t: f64) -> Result<f64> {
        Ok((t - self.p as f64 * self.centering_integral - self.mu_gamma) / self.sigma()?)
    }
}

/// Symmetric Laurent coefficients `a_k = a_{−k}` of `f*(z(ξ))` on
/// `h < |ξ| < 1/h`, where `z(ξ) = (1 + hξ)(ξ + h)/(ξ(1 − γ₂)²)`.
struct LaurentFStar {
    h: f64,
    c: f64,
    g: f64,
}

impl LaurentFStar {
    fn new(gamma1: f64, gamma2: f64, h: f64) -> Self {
        // 1/z has coefficients G(−h)^|k| with G = (1−γ₂)²/(1−h²) = (1−γ₂)/(1−γ₁).
        Self { h, c: 1.0 / (1.0 - gamma2).powi(2), g: (1.0 - gamma2) / (1.0 - gamma1) }
    }

    fn coef(&self, k: usize) -> f64 {
        let (h, c, g) = (self.h, self.c, self.g);
        let h2 = h * h;
        let z = match k {
            0 => c * (1.0 + h2),
            1 => c * h,
            _ => 0.0,
        };
        let z2 = match k {
            0 => c * c * ((1.0 + h2).powi(2) + 2.0 * h2),
            1 => 2.0 * c * c * h * (1.0 + h2),
            2 => c * c * h2,
            _ => 0.0,
        };
        let sign_pow = (-h).powi(k as i32);
        let inv = g * sign_pow;
        let inv2 = g * g * sign_pow * (k as f64 + 1.0 + 2.0 * h2 / (1.0 - h2));
        let konst = if k == 0 { 2.0 } else { 0.0 };
        konst - 2.0 * z + z2 - 2.0 * inv + inv2
    }

    fn terms(&self) -> usize {
        // Coefficients decay like k h^k; stop once k² h^{2k} is below 1e-40.
        let lh = -self.h.ln();
        let mut k = 8usize;
        while (2.0 * (k as f64).ln() - 2.0 * k as f64 * lh) > -92.0 && k < 2_000_000 {
            k *= 2;
        }
        k
    }

    /// `½ Σ_{j≥0} a_j (1 + (−1)^j − 2(−γ₂/h)^j)`.
    fn mean(&self, gamma2: f64) -> f64 {
        let r = -gamma2 / self.h;
        let mut sum = 0.0;
        let mut rj = 1.0;
        for j in 0..self.terms() {
            let parity = if j % 2 == 0 { 2.0 } else { 0.0 };
            sum += self.coef(j) * (parity - 2.0 * rj);
            rj *= r;
        }
        0.5 * sum
    }

    /// `2 Σ_{k≥1} k a_k a_{−k}`.
    fn variance(&self) -> f64 {
        (1..self.terms()).map(|k| 2.0 * k as f64 * self.coef(k).powi(2)).sum()
    }
}

fn printed_constants(g1: f64, g2: f64, h: f64, reading: ConstantsReading) -> [f64; 8] {
    let h2 = h * h;
    let k21 = match reading {
        ConstantsReading::PrintedB => 2.0 * h * (1.0 + h2) / (1.0 - g2).powi(4) - 2.0 * h / (1.0 - g2).powi(2),
        _ => 2.0 * h * (1.0 + h2) / ((1.0 - g2).powi(4) - 2.0 * h / (1.0 - g2).powi(2)),
    };
    let k22 = 2.0 * h * (1.0 + h2).powi(2) / (1.0 - g1).powi(4) - 2.0 * h / (1.0 - g1).powi(2);
    let k31 = h2 / (1.0 - g1).powi(4);
    let k32 = -2.0 * (1.0 - g2).powi(2) / (1.0 - g2).powi(4);
    let j2 = (1.0 - g2).powi(4);
    let j1 = -2.0 * (1.0 - g2).powi(2);
    let mu = 2.0 * k31 * (1.0 - g2 / h2)
        + 2.0 * k21 * g2 / h
        + 2.0 * k32 * (1.0 - g1 * g1 / h2)
        + 2.0 * k22 * g1 / h;
    let hm = h2 - 1.0;
    let s2 = 2.0 * (k21 * k21 + k31 * k31 + 2.0 * k32 * k32) / (h * hm)
        + (j1 * k21 / h - j1 * k31 * (h2 + 1.0)) / (h2 + hm)
        + (j2 * k21 * 2.0 * h / hm.powi(3) + j2 * k31 * (1.0 - 3.0 * h2)) / (h * hm.powi(3));
    [k21, k22, k31, k32, j1, j2, mu, s2]
}

pub fn deviance_constants(p: usize, n1: usize, n2: usize) -> Result<DevianceConstants> {
    deviance_constants_with(p, n1, n2, ConstantsReading::Contour)
}

pub fn deviance_constants_with(
    p: usize,
    n1: usize,
    n2: usize,
    reading: ConstantsReading,
) -> Result<DevianceConstants> {
    if p == 0 || p >= n1 || p >= n2 {
        return Err(Error::Precondition(format!(
            "constants need 0 < p < n1 and p < n2 (p = {p}, n1 = {n1}, n2 = {n2})"
        )));
    }
    let g1 = p as f64 / n1 as f64;
    let g2 = p as f64 / n2 as f64;
    let law = FMatrixLsd::new(g1, g2)?;
    let h = law.h();
    let a = ((1.0 - h) / (1.0 - g2)).powi(2);
    let b = ((1.0 + h) / (1.0 - g2)).powi(2);
    let centering_integral = f_lsd_integral(&law, f_star)?;
    let lau = LaurentFStar::new(g1, g2, h);
    let (mu_contour, sigma2_contour) = (lau.mean(g2), lau.variance());
    let pa = printed_constants(g1, g2, h, ConstantsReading::PrintedA);
    let pb = printed_constants(g1, g2, h, ConstantsReading::PrintedB);
    let (mu_gamma, sigma2_gamma) = match reading {
        ConstantsReading::Contour => (mu_contour, sigma2_contour),
        ConstantsReading::PrintedA => (pa[6], pa[7]),
        ConstantsReading::PrintedB => (pb[6], pb[7]),
    };
    let k = if reading == ConstantsReading::PrintedB { pb } else { pa };
    Ok(DevianceConstants {
        p,
        n1,
        n2,
        gamma1: g1,
        gamma2: g2,
        h,
        a,
        b,
        k21: k[0],
        k22: k[1],
        k31: k[2],
        k32: k[3],
        j1: k[4],
        j2: k[5],
        centering_integral,
        reading,
        mu_gamma,
        sigma2_gamma,
        mu_contour,
        sigma2_contour,
        mu_printed_a: pa[6],
        sigma2_printed_a: pa[7],
        mu_printed_b: pb[6],
        sigma2_printed_b: pb[7],
    })
}

type ConstKey = (usize, usize, usize, ConstantsReading);

fn cached_constants(p: usize, n1: usize, n2: usize, reading: ConstantsReading) -> Result<DevianceConstants> {
    static CACHE: OnceLock<Mutex<HashMap<ConstKey, DevianceConstants>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (p, n1, n2, reading);
    if let Some(c) = cache.lock().expect("constants cache").get(&key) {
        return Ok(c.clone());
    }
    let c = deviance_constants_with(p, n1, n2, reading)?;
    cache.lock().expect("constants cache").insert(key, c.clone());
    Ok(c)
}

fn segment_covariance(x: &DMatrix<f64>, start: usize, end: usize, center: bool) -> DMatrix<f64> {
    let seg = x.rows(start, end - start);
    let mut s = if center {
        let mean = seg.row_mean();
        let mut c = seg.into_owned();
        for mut r in c.row_iter_mut() {
            r -= &mean;
        }
        c.tr_mul(&c)
    } else {
        seg.tr_mul(&seg)
    };
    symmetrize(&mut s);
    s / (end - start) as f64
}

/// Normalized deviance between rows `[0, τ)` and `[τ, n)`; segment
/// covariances divide by their length and are not mean-centered.
pub fn normalized_deviance(data: &DataMatrix, tau: usize, consts: &DevianceConstants) -> Result<f64> {
    let (n, p) = (data.n(), data.p());
    if tau == 0 || tau >= n {
        return Err(Error::Input(format!("tau = {tau} outside 1..{n}")));
    }
    if consts.p != p || consts.n1 != tau || consts.n2 != n - tau {
        return Err(Error::Input(format!(
            "constants are for (p, n1, n2) = ({}, {}, {}), split is ({p}, {tau}, {})",
            consts.p,
            consts.n1,
            consts.n2,
            n - tau
        )));
    }
    if tau <= p || n - tau <= p {
        return Err(Error::Rank(format!("both segments need more than p = {p} rows")));
    }
    let a = segment_covariance(data.values(), 0, tau, false);
    let b = segment_covariance(data.values(), tau, n, false);
    consts.normalize(ratio_deviance(&a, &b)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub alpha: f64,
    pub min_seg: usize,
    /// Subtract segment means before forming covariances.
    pub center: bool,
    pub reading: ConstantsReading,
    /// Keep every `(τ, T̃(τ))` pair of every scanned interval.
    pub keep_traces: bool,
}

impl SegmentationConfig {
    pub fn new(alpha: f64, min_seg: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if min_seg == 0 {
            return Err(Error::Config("minimum segment length must be positive".into()));
        }
        Ok(Self { alpha, min_seg, center: false, reading: ConstantsReading::Contour, keep_traces: false })
    }

    /// `ν = Φ⁻¹(1 − α/n²)`.
    pub fn threshold(&self, n: usize) -> f64 {
        normal::upper_quantile(self.alpha / (n as f64 * n as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalScan {
    pub start: usize,
    pub end: usize,
    pub tau_hat: usize,
    pub max_stat: f64,
    pub accepted: bool,
    pub trace: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangepointResult {
    pub changepoints: Vec<usize>,
    pub threshold: f64,
    pub min_seg: usize,
    pub alpha: f64,
    pub n: usize,
    pub p: usize,
    pub scans: Vec<IntervalScan>,
}

/// Incremental state for one block of split points. Holds scatter matrices
/// `W_L`, `W_R`, their inverses, `P = W_R⁻¹W_L` and `Q = W_L⁻¹W_R`.
struct SplitState {
    wl: DMatrix<f64>,
    wr: DMatrix<f64>,
    wl_inv: DMatrix<f64>,
    wr_inv: DMatrix<f64>,
    pm: DMatrix<f64>,
    qm: DMatrix<f64>,
    mean_l: DVector<f64>,
    mean_r: DVector<f64>,
    nl: usize,
    nr: usize,
}

fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    cholesky_factor(m).map_err(|_| Error::Rank(format!("{what} scatter matrix is singular")))?;
    let chol = nalgebra::Cholesky::new(m.clone())
        .ok_or_else(|| Error::Rank(format!("{what} scatter matrix is not positive definite")))?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Default minimum segment length `max(5p, 30)`. It keeps `γ ≤ 0.2` on every
/// candidate segment; with shorter segments the normal approximation of `T̃`
/// is too light-tailed at the `α/n²` level.
pub fn default_min_seg(p: usize) -> usize {
    (5 * p).max(30)
}

/// Running sums `Σ xxᵀ` and `Σ x` over a row range.
#[derive(Clone)]
struct Moments {
    sxx: DMatrix<f64>,
    sx: DVector<f64>,
    n: usize,
}

impl Moments {
    fn zero(p: usize) -> Self {
        Self { sxx: DMatrix::zeros(p, p), sx: DVector::zeros(p), n: 0 }
    }

    fn add_rows(&mut self, x: &DMatrix<f64>, start: usize, end: usize) {
        if end > start {
            let seg = x.rows(start, end - start);
            self.sxx += seg.tr_mul(&seg);
            self.sx += seg.row_sum().transpose();
            self.n += end - start;
        }
    }

    fn minus(&self, other: &Moments) -> Moments {
        Moments { sxx: &self.sxx - &other.sxx, sx: &self.sx - &other.sx, n: self.n - other.n }
    }

    /// Scatter matrix (about the mean when `center`) and the mean.
    fn scatter(&self, center: bool) -> (DMatrix<f64>, DVector<f64>) {
        let mean = &self.sx / self.n as f64;
        let mut w = self.sxx.clone();
        if center {
            w.ger(-(self.n as f64), &mean, &mean, 1.0);
        }
        symmetrize(&mut w);
        (w, mean)
    }
}

fn trace_of_square(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut t = 0.0;
    for j in 0..p {
        for i in 0..p {
            t += m[(i, j)] * m[(j, i)];
        }
    }
    t
}

impl SplitState {
    fn new(left: &Moments, right: &Moments, center: bool) -> Result<Self> {
        let (wl, mean_l) = left.scatter(center);
        let (wr, mean_r) = right.scatter(center);
        let wl_inv = spd_inverse(&wl, "left segment")?;
        let wr_inv = spd_inverse(&wr, "right segment")?;
        let pm = &wr_inv * &wl;
        let qm = &wl_inv * &wr;
        Ok(Self { wl, wr, wl_inv, wr_inv, pm, qm, mean_l, mean_r, nl: left.n, nr: right.n })
    }

    fn deviance(&self) -> f64 {
        let p = self.pm.nrows();
        let r = self.nr as f64 / self.nl as f64;
        let tr_p = self.pm.trace();
        let tr_q = self.qm.trace();
        let tr_p2 = trace_of_square(&self.pm);
        let tr_q2 = trace_of_square(&self.qm);
        r * r * tr_p2 - 2.0 * r * tr_p + 2.0 * p as f64 - 2.0 * tr_q / r + tr_q2 / (r * r)
    }

    /// Moves row `x` from the right segment to the left one.
    fn shift(&mut self, x: &DVector<f64>, center: bool) -> Result<()> {
        let (u, a) = if center {
            let nl = self.nl as f64;
            let d = x - &self.mean_l;
            self.mean_l += &d / (nl + 1.0);
            (d, nl / (nl + 1.0))
        } else {
            (x.clone(), 1.0)
        };
        let (w, b) = if center {
            let nr = self.nr as f64;
            let d = x - &self.mean_r;
            self.mean_r -= &d / (nr - 1.0);
            (d, nr / (nr - 1.0))
        } else {
            (x.clone(), 1.0)
        };
        // W_L += a uuᵀ, W_R −= b wwᵀ and the matching Sherman–Morrison updates.
        let yl = &self.wl_inv * &u;
        let dl = 1.0 + a * u.dot(&yl);
        let yr = &self.wr_inv * &w;
        let dr = 1.0 - b * w.dot(&yr);
        if !(dl > 0.0) || !(dr > 1e-12) {
            return Err(Error::Rank("segment scatter lost positive definiteness".into()));
        }
        let alpha_l = a / dl;
        let beta_r = b / dr;

        // P' = (W_R⁻¹ + β y_r y_rᵀ)(W_L + a uuᵀ)
        let wr_inv_u = &self.wr_inv * &u;
        let wl_yr = &self.wl * &yr;
        let yr_u = yr.dot(&u);
        self.pm.ger(a, &wr_inv_u, &u, 1.0);
        self.pm.ger(beta_r, &yr, &wl_yr, 1.0);
        self.pm.ger(a * beta_r * yr_u, &yr, &u, 1.0);

        // Q' = (W_L⁻¹ − α y_l y_lᵀ)(W_R − b wwᵀ)
        let wl_inv_w = &self.wl_inv * &w;
        let wr_yl = &self.wr * &yl;
        let yl_w = yl.dot(&w);
        self.qm.ger(-b, &wl_inv_w, &w, 1.0);
        self.qm.ger(-alpha_l, &yl, &wr_yl, 1.0);
        self.qm.ger(alpha_l * b * yl_w, &yl, &w, 1.0);

        self.wl.ger(a, &u, &u, 1.0);
        self.wr.ger(-b, &w, &w, 1.0);
        self.wl_inv.ger(-alpha_l, &yl, &yl, 1.0);
        self.wr_inv.ger(beta_r, &yr, &yr, 1.0);
        self.nl += 1;
        self.nr -= 1;
        Ok(())
    }
}

/// Split points per block; each block restarts from exact factorizations so
/// round-off cannot accumulate and the result does not depend on threading.
const SCAN_BLOCK: usize = 32;

/// `T(S_L, S_R)` for every split `τ` with `s + ℓ < τ < e − ℓ`, rows `[s, τ)`
/// against `[τ, e)`.
pub fn scan_deviance(
    data: &DataMatrix,
    start: usize,
    end: usize,
    min_seg: usize,
    center: bool,
) -> Result<Vec<(usize, f64)>> {
    let x = data.values();
    let p = data.p();
    if end > data.n() || start >= end {
        return Err(Error::Input(format!("interval [{start}, {end}) outside 0..{}", data.n())));
    }
    let lo = start + min_seg + 1;
    if end < min_seg + 1 || lo >= end - min_seg {
        return Ok(Vec::new());
    }
    let hi = end - min_seg; // exclusive
    if lo - start <= p || end - (hi - 1) <= p {
        return Err(Error::Rank(format!(
            "segments of {} rows cannot estimate a {p}x{p} covariance",
            (lo - start).min(end - hi + 1)
        )));
    }
    // Left-segment moments at each block start, accumulated in one pass.
    let mut total = Moments::zero(p);
    total.add_rows(x, start, end);
    let mut running = Moments::zero(p);
    let mut at = start;
    let blocks: Vec<(usize, Moments)> = (lo..hi)
        .step_by(SCAN_BLOCK)
        .map(|b0| {
            running.add_rows(x, at, b0);
            at = b0;
            (b0, running.clone())
        })
        .collect();
    let parts: Vec<Vec<(usize, f64)>> = blocks
        .par_iter()
        .map(|(b0, left)| {
            let b0 = *b0;
            let b1 = (b0 + SCAN_BLOCK).min(hi);
            let mut st = SplitState::new(left, &total.minus(left), center)?;
            let mut out = Vec::with_capacity(b1 - b0);
            for tau in b0..b1 {
                out.push((tau, st.deviance()));
                if tau + 1 < b1 {
                    let row = x.row(tau).transpose();
                    st.shift(&row, center)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// `(τ, T̃(τ))` over the admissible splits of `[start, end)`, with constants
/// for `γ = (p/(τ − s), p/(e − τ))`.
pub fn scan_normalized(
    data: &DataMatrix,
    start: usize,
    end: usize,
    config: &SegmentationConfig,
) -> Result<Vec<(usize, f64)>> {
    let p = data.p();
    scan_deviance(data, start, end, config.min_seg, config.center)?
        .into_iter()
        .map(|(tau, t)| {
            let c = cached_constants(p, tau - start, end - tau, config.reading)?;
            Ok((tau, c.normalize(t)?))
        })
        .collect()
}

/// Recursive binary segmentation with a fixed threshold and minimum segment
/// length on every sub-interval.
pub fn ratio_binseg(data: &DataMatrix, config: &SegmentationConfig) -> Result<ChangepointResult> {
    let (n, p) = (data.n(), data.p());
    if config.min_seg <= p {
        return Err(Error::Config(format!(
            "minimum segment length {} must exceed the dimension {p}",
            config.min_seg
        )));
    }
    if n < 2 * config.min_seg + 1 {
        return Err(Error::Precondition(format!(
            "series of length {n} is shorter than 2 * min_seg + 1 = {}",
            2 * config.min_seg + 1
        )));
    }
    let threshold = config.threshold(n);
    let mut changepoints = Vec::new();
    let mut scans = Vec::new();
    let mut stack = vec![(0usize, n)];
    while let Some((s, e)) = stack.pop() {
        let trace = scan_normalized(data, s, e, config)?;
        let Some(&(tau_hat, max_stat)) = trace
            .iter()
            .fold(None, |best: Option<&(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
        else {
            continue;
        };
        let accepted = max_stat > threshold;
        scans.push(IntervalScan {
            start: s,
            end: e,
            tau_hat,
            max_stat,
            accepted,
            trace: if config.keep_traces { trace } else { Vec::new() },
        });
        if accepted {
            changepoints.push(tau_hat);
            stack.push((tau_hat, e));
            stack.push((s, tau_hat));
        }
    }
    changepoints.sort_unstable();
    scans.sort_by_key(|s| (s.start, s.end));
    Ok(ChangepointResult {
        changepoints,
        threshold,
        min_seg: config.min_seg,
        alpha: config.alpha,
        n,
        p,
        scans,
    })
}

/// Fraction of detections farther than `window` from every true change;
/// zero when nothing is detected.
pub fn false_positive_rate(detected: &[usize], truth: &[usize], window: usize) -> f64 {
    if detected.is_empty() {
        return 0.0;
    }
    let correct = detected
        .iter()
        .filter(|&&d| truth.iter().any(|&t| d.abs_diff(t) <= window))
        .count();
    (detected.len() - correct) as f64 / detected.len() as f64
}

/// Monte Carlo check of the centering and scale against null Gaussian draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub reps: usize,
    pub mc_mean: f64,
    pub mc_var: f64,
    pub mc_se: f64,
    pub checks: Vec<ReadingCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingCheck {
    pub reading: ConstantsReading,
    pub mu: f64,
    pub sigma2: f64,
    /// `(mean − μ)/SE`.
    pub mean_z: f64,
    pub passes: bool,
}

impl CalibrationReport {
    pub fn passing(&self) -> Vec<ConstantsReading> {
        self.checks.iter().filter(|c| c.passes).map(|c| c.reading).collect()
    }
}

/// Null draws of `T(X₁ᵀX₁/n₁, X₂ᵀX₂/n₂) − p ∫f* dF_γ`.
pub fn null_centered_deviances(p: usize, n1: usize, n2: usize, reps: usize, seed: u64) -> Result<Vec<f64>> {
    let c = deviance_constants(p, n1, n2)?;
    let shift = p as f64 * c.centering_integral;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let a = white_covariance(&mut rng, n1, p);
            let b = white_covariance(&mut rng, n2, p);
            Ok(ratio_deviance(&a, &b)?.value - shift)
        })
        .collect()
}

fn white_covariance<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize) -> DMatrix<f64> {
    let mut buf = vec![0.0; n * p];
    fill_standard_normal(rng, &mut buf);
    let x = DMatrix::from_vec(n, p, buf);
    let mut s = x.tr_mul(&x);
    symmetrize(&mut s);
    s / n as f64
}

/// A reading passes when `σ² > 0` and `μ` lies within three Monte Carlo
/// standard errors of the simulated mean.
pub fn calibration_gate(p: usize, n1: usize, n2: usize, reps: usize, seed: u64) -> Result<CalibrationReport> {
    if reps < 2 {
        return Err(Error::Config("calibration needs at least two replicates".into()));
    }
    let draws = null_centered_deviances(p, n1, n2, reps, seed)?;
    let m = draws.iter().sum::<f64>() / reps as f64;
    let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let se = (v / reps as f64).sqrt();
    let checks = ConstantsReading::ALL
        .into_iter()
        .map(|reading| {
            let c = deviance_constants_with(p, n1, n2, reading)?;
            let mean_z = (m - c.mu_gamma) / se;
            Ok(ReadingCheck {
                reading,
                mu: c.mu_gamma,
                sigma2: c.sigma2_gamma,
                mean_z,
                passes: c.sigma2_gamma > 0.0 && mean_z.abs() <= 3.0,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CalibrationReport { p, n1, n2, reps, mc_mean: m, mc_var: v, mc_se: se, checks })
}

//! Tracy–Widom (order 1) distribution from the Hastings–McLeod solution of
//! Painlevé II, and the centering/scaling constants that map largest
//! eigenvalues onto it.

pub mod airy;
mod dd;

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use dd::Dd;

pub use airy::{airy, airy_tail_integral, AiryValues};

/// Default right boundary of the Painlevé II integration.
pub const DEFAULT_X_RIGHT: f64 = 6.0;
/// Default left boundary.
pub const DEFAULT_X_LEFT: f64 = -8.0;
/// Default RK4 step. The Hastings–McLeod branch amplifies perturbations by
/// about `exp((2√2/3)|x|^{3/2})` towards the left, so the step must be small
/// enough that truncation errors stay below 1e−16 near the origin.
pub const DEFAULT_STEP: f64 = 2.5e-5;
/// Spacing of the tabulated CDF.
pub const TABLE_SPACING: f64 = 1e-3;
/// Magnitude of `q` treated as leaving the Hastings–McLeod branch.
pub const BLOWUP_BOUND: f64 = 1e6;

const TABLE_FORMAT: &str = "# spectrastat tracy-widom-1 table v1";

/// Samples of the Hastings–McLeod solution on a descending grid.
#[derive(Debug, Clone)]
pub struct Painleve2Solution {
    pub grid: Vec<f64>,
    pub q_values: Vec<f64>,
    pub q_prime_values: Vec<f64>,
    pub step: f64,
}

fn rhs(x: Dd, q: Dd, qp: Dd) -> (Dd, Dd) {
    let q3 = q.mul(q).mul(q);
    (qp, x.mul(q).add(q3.mul_f64(2.0)))
}

/// Integrates `q'' = xq + 2q³` leftward from `q(x_right) = Ai(x_right)`,
/// `q'(x_right) = Ai'(x_right)` with classical RK4 carried in double-double
/// arithmetic.
pub fn solve_painleve2(x_right: f64, x_left: f64, step: f64) -> Result<Painleve2Solution> {
    if !(x_right >= 5.0 && x_right.is_finite()) {
        return Err(Error::Precondition(format!("x_right must be >= 5, got {x_right}")));
    }
    if !(x_left <= -8.0 && x_left.is_finite()) {
        return Err(Error::Precondition(format!("x_left must be <= -8, got {x_left}")));
    }
    if !(step > 0.0 && step <= 0.01) {
        return Err(Error::Precondition(format!("step must lie in (0, 0.01], got {step}")));
    }
    // An even number of steps so that Simpson's rule tiles the grid.
    let mut steps = ((x_right - x_left) / step).round() as usize;
    steps += steps % 2;
    let h = (x_right - x_left) / steps as f64;
    let half = h / 2.0;

    let init = airy(x_right);
    let (mut q, mut qp) = (Dd::from(init.ai), Dd::from(init.ai_prime));
    let mut grid = Vec::with_capacity(steps + 1);
    let mut q_values = Vec::with_capacity(steps + 1);
    let mut q_prime_values = Vec::with_capacity(steps + 1);
    grid.push(x_right);
    q_values.push(init.ai);
    q_prime_values.push(init.ai_prime);
    let xr = Dd::from(x_right);
    let axpy = |y: Dd, a: f64, k: Dd| y.sub(k.mul_f64(a));
    for i in 0..steps {
        let x = xr.sub(Dd::from(h).mul_f64(i as f64));
        let xm = x.sub(Dd::from(half));
        let xn = xr.sub(Dd::from(h).mul_f64((i + 1) as f64));
        let (k1q, k1p) = rhs(x, q, qp);
        let (k2q, k2p) = rhs(xm, axpy(q, half, k1q), axpy(qp, half, k1p));
        let (k3q, k3p) = rhs(xm, axpy(q, half, k2q), axpy(qp, half, k2p));
        let (k4q, k4p) = rhs(xn, axpy(q, h, k3q), axpy(qp, h, k3p));
        let sum_q = k1q.add(k2q.mul_f64(2.0)).add(k3q.mul_f64(2.0)).add(k4q);
        let sum_p = k1p.add(k2p.mul_f64(2.0)).add(k3p.mul_f64(2.0)).add(k4p);
        q = q.sub(sum_q.mul_f64(h).div_f64(6.0));
        qp = qp.sub(sum_p.mul_f64(h).div_f64(6.0));
        let qf = q.to_f64();
        if !qf.is_finite() || qf.abs() > BLOWUP_BOUND {
            return Err(Error::UnstableBranch { x: xn.to_f64() });
        }
        grid.push(xn.to_f64());
        q_values.push(qf);
        q_prime_values.push(qp.to_f64());
    }
    if let Some(i) = q_values.iter().position(|&v| v <= 0.0) {
        return Err(Error::UnstableBranch { x: grid[i] });
    }
    Ok(Painleve2Solution {
        grid,
        q_values,
        q_prime_values,
        step: h,
    })
}

impl Painleve2Solution {
    pub fn x_right(&self) -> f64 {
        self.grid[0]
    }

    pub fn x_left(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// `q(x)` by cubic Hermite interpolation between grid points.
    pub fn q_at(&self, x: f64) -> Option<f64> {
        if x > self.x_right() || x < self.x_left() {
            return None;
        }
        let t = (self.x_right() - x) / self.step;
        let i = (t.floor() as usize).min(self.grid.len() - 2);
        // Local coordinate running in the +x direction from grid[i+1] to grid[i].
        let (x0, x1) = (self.grid[i + 1], self.grid[i]);
        Some(hermite(
            x,
            x0,
            x1,
            self.q_values[i + 1],
            self.q_values[i],
            self.q_prime_values[i + 1],
            self.q_prime_values[i],
        ))
    }
}

fn hermite(x: f64, x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

/// Airy-tail contributions `(∫ Ai, ∫ Ai², ∫ x Ai²)` over `[x, ∞)`.
fn airy_tails(x: f64) -> (f64, f64, f64) {
    let a = airy(x);
    let (ai, aip) = (a.ai, a.ai_prime);
    let t1 = aip * aip - x * ai * ai;
    let t2 = (x * aip * aip - x * x * ai * ai - ai * aip) / 3.0;
    (airy_tail_integral(x), t1, t2)
}

/// Tabulated `F₁` (with its density) on an ascending, uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracyWidomTable {
    pub s_grid: Vec<f64>,
    pub cdf_values: Vec<f64>,
    pub density_values: Vec<f64>,
}

static GLOBAL: OnceLock<std::result::Result<TracyWidomTable, String>> = OnceLock::new();

impl TracyWidomTable {
    /// Builds the table from a Painlevé II solution. `F₁(s) = exp(−E(s)/2)` with
    /// `E(s) = ∫_s^∞ q + ∫_s^∞ x q² − s ∫_s^∞ q²`, each integral split into a
    /// composite-Simpson part on the grid and an exact Airy tail.
    pub fn from_solution(sol: &Painleve2Solution) -> Result<Self> {
        let n = sol.grid.len();
        if n < 3 || (n - 1) % 2 != 0 {
            return Err(Error::Input("solution grid must have an even number of steps".into()));
        }
        let h = sol.step;
        let (tail0, tail1, tail2) = airy_tails(sol.x_right());
        let f0 = |i: usize| sol.q_values[i];
        let f1 = |i: usize| sol.q_values[i] * sol.q_values[i];
        let f2 = |i: usize| sol.grid[i] * f1(i);

        let m = (n - 1) / 2 + 1;
        let stride = ((TABLE_SPACING / (2.0 * h)).round() as usize).max(1);
        let mut s_grid = Vec::with_capacity(m / stride + 1);
        let mut cdf = Vec::with_capacity(m / stride + 1);
        let mut dens = Vec::with_capacity(m / stride + 1);
        let (mut i0, mut i1, mut i2) = (tail0, tail1, tail2);
        for j in 0..m {
            let k = 2 * j;
            if j > 0 {
                let simpson = |f: &dyn Fn(usize) -> f64| h / 3.0 * (f(k - 2) + 4.0 * f(k - 1) + f(k));
                i0 += simpson(&f0);
                i1 += simpson(&f1);
                i2 += simpson(&f2);
            }
            if j % stride != 0 {
                continue;
            }
            let s = sol.grid[k];
            let e = i0 + i2 - s * i1;
            let f = (-0.5 * e).exp();
            s_grid.push(s);
            cdf.push(f);
            dens.push(0.5 * f * (sol.q_values[k] + i1));
        }
        s_grid.reverse();
        cdf.reverse();
        dens.reverse();
        let table = Self {
            s_grid,
            cdf_values: cdf,
            density_values: dens,
        };
        table.check()?;
        Ok(table)
    }

    /// Builds with the default grid (`[−8, 6]`, RK4 step `2.5e−5`).
    pub fn build() -> Result<Self> {
        Self::from_solution(&solve_painleve2(DEFAULT_X_RIGHT, DEFAULT_X_LEFT, DEFAULT_STEP)?)
    }

    /// Process-wide table, built at most once.
    pub fn global() -> Result<&'static Self> {
        GLOBAL
            .get_or_init(|| Self::build().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::numerical(format!("Tracy-Widom table build failed: {e}"), 0))
    }

    fn check(&self) -> Result<()> {
        let ok_range = self.cdf_values.iter().all(|&v| v > 0.0 && v < 1.0);
        let increasing = self.cdf_values.windows(2).all(|w| w[1] > w[0]);
        if !ok_range || !increasing {
            return Err(Error::numerical("F1 table is not a strictly increasing CDF", 0));
        }
        Ok(())
    }

    fn s_min(&self) -> f64 {
        self.s_grid[0]
    }

    fn s_max(&self) -> f64 {
        self.s_grid[self.s_grid.len() - 1]
    }

    /// `F₁(s)`, clamped to the open interval `(0, 1)`.
    pub fn cdf(&self, s: f64) -> f64 {
        const TOP: f64 = 1.0 - f64::EPSILON / 2.0;
        if s.is_nan() {
            return f64::NAN;
        }
        if s >= self.s_max() {
            if s > 14.0 {
                return TOP;
            }
            let (t0, t1, t2) = airy_tails(s);
            return (-0.5 * (t0 + t2 - s * t1)).exp().min(TOP);
        }
        if s <= self.s_min() {
            // Left tail: log F₁(s) ≈ −|s|³/24.
            let s0 = self.s_min();
            let v = self.cdf_values[0] * ((s0.abs().powi(3) - s.abs().powi(3)) / 24.0).exp();
            return v.max(f64::MIN_POSITIVE);
        }
        let ds = self.s_grid[1] - self.s_grid[0];
        let i = (((s - self.s_min()) / ds).floor() as usize).min(self.s_grid.len() - 2);
        hermite(
            s,
            self.s_grid[i],
            self.s_grid[i + 1],
            self.cdf_values[i],
            self.cdf_values[i + 1],
            self.density_values[i],
            self.density_values[i + 1],
        )
        .clamp(f64::MIN_POSITIVE, TOP)
    }

    /// Density `F₁'(s)` on the tabulated range (zero outside).
    pub fn density(&self, s: f64) -> f64 {
        if s <= self.s_min() || s >= self.s_max() {
            return 0.0;
        }
        let ds = self.s_grid[1] - self.s_grid[0];
        let i = (((s - self.s_min()) / ds).floor() as usize).min(self.s_grid.len() - 2);
        let t = (s - self.s_grid[i]) / ds;
        (1.0 - t) * self.density_values[i] + t * self.density_values[i + 1]
    }

    /// Inverse CDF for `α ∈ (0.0005, 0.9995)`.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0005 && alpha < 0.9995) {
            return Err(Error::Domain(format!(
                "Tracy-Widom quantile level must lie in (0.0005, 0.9995), got {alpha}"
            )));
        }
        let (mut lo, mut hi) = (self.s_min(), self.s_max());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < alpha {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Writes the `(s, F₁, F₁')` table as versioned CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TABLE_FORMAT}")?;
        writeln!(w, "s,cdf,density")?;
        for ((s, f), d) in self.s_grid.iter().zip(&self.cdf_values).zip(&self.density_values) {
            writeln!(w, "{s:.17e},{f:.17e},{d:.17e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let first = lines.next().transpose()?.unwrap_or_default();
        if first.trim() != TABLE_FORMAT {
            return Err(Error::Parse(format!(
                "unrecognized Tracy-Widom table header {first:?}"
            )));
        }
        let (mut s_grid, mut cdf_values, mut density_values) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            match cols.as_deref() {
                Ok([s, f, d]) => {
                    s_grid.push(*s);
                    cdf_values.push(*f);
                    density_values.push(*d);
                }
                _ => return Err(Error::Parse(format!("bad table row {}: {line:?}", i + 2))),
            }
        }
        if s_grid.len() < 2 {
            return Err(Error::Parse("Tracy-Widom table has fewer than two rows".into()));
        }
        let t = Self {
            s_grid,
            cdf_values,
            density_values,
        };
        t.check()?;
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    /// Loads a persisted table, building and saving it when absent or when
    /// `rebuild` is set.
    pub fn load_or_build(path: impl AsRef<Path>, rebuild: bool) -> Result<Self> {
        let path = path.as_ref();
        if !rebuild && path.exists() {
            return Self::load(path);
        }
        let t = Self::build()?;
        t.save(path)?;
        Ok(t)
    }

    /// Largest absolute CDF difference against another table on this grid.
    pub fn max_difference(&self, other: &Self) -> f64 {
        self.s_grid
            .iter()
            .zip(&self.cdf_values)
            .map(|(&s, &f)| (other.cdf(s) - f).abs())
            .fold(0.0, f64::max)
    }
}

/// `F₁(s)`.
pub fn tw1_cdf(table: &TracyWidomTable, s: f64) -> f64 {
    table.cdf(s)
}

/// `F₁⁻¹(α)`.
pub fn tw1_quantile(table: &TracyWidomTable, alpha: f64) -> Result<f64> {
    table.quantile(alpha)
}

/// Centering and scaling of the largest eigenvalue of a white Wishart matrix
/// `XᵀX` with `n` observations in dimension `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WishartCentering {
    pub n: usize,
    pub p: usize,
    pub mu: f64,
    pub sigma: f64,
}

pub fn wishart_centering(n: usize, p: usize) -> Result<WishartCentering> {
    if n < 2 || p < 1 {
        return Err(Error::Precondition(format!(
            "Wishart centering needs n >= 2, p >= 1 (got n = {n}, p = {p})"
        )));
    }
    let a = ((n - 1) as f64).sqrt();
    let b = (p as f64).sqrt();
    Ok(WishartCentering {
        n,
        p,
        mu: (a + b).powi(2),
        sigma: (a + b) * (1.0 / a + 1.0 / b).cbrt(),
    })
}

impl WishartCentering {
    /// `(ℓ₁ − μ)/σ` for the largest eigenvalue of the unnormalized Wishart matrix.
    pub fn normalize(&self, largest: f64) -> f64 {
        (largest - self.mu) / self.sigma
    }
}

/// Half-corrected centering and scaling for eigenvalues of `XᵀX/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalCentering {
    pub n: usize,
    pub p: usize,
    pub mu: f64,
    pub xi: f64,
}

pub fn signal_centering(n: usize, p: usize) -> Result<SignalCentering> {
    if n < 1 || p < 1 {
        return Err(Error::Precondition(format!(
            "signal centering needs n, p >= 1 (got n = {n}, p = {p})"
        )));
    }
    let nf = n as f64;
    let a = (nf - 0.5).sqrt();
    let b = (p as f64 - 0.5).sqrt();
    let mu = (a + b).powi(2) / nf;
    let xi = (mu / nf).sqrt() * (1.0 / a + 1.0 / b).cbrt();
    Ok(SignalCentering { n, p, mu, xi })
}

/// Centering for the largest root of `det(λA − B) = 0` with `A = W_p(I, m)/m̆`
/// and `B = W_p(I, n)/n̆`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiCentering {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub m_breve: usize,
    pub n_breve: usize,
    pub p_breve: usize,
    pub gamma_angle: f64,
    pub psi_angle: f64,
    pub mu_j: f64,
    pub sigma_j: f64,
}

/// `m` is the degrees of freedom of the matrix being inverted, `n` those of the
/// other one.
pub fn jacobi_centering(m: usize, n: usize, p: usize) -> Result<JacobiCentering> {
    if m < 2 || n < 2 || p < 2 {
        return Err(Error::Precondition(format!(
            "Jacobi centering needs m, n, p >= 2 (got m = {m}, n = {n}, p = {p})"
        )));
    }
    if p >= m {
        return Err(Error::Precondition(format!(
            "Jacobi centering needs p < m (got p = {p}, m = {m})"
        )));
    }
    if m + n <= p {
        return Err(Error::Precondition(format!(
            "Jacobi centering needs m + n > p (got m + n = {}, p = {p})",
            m + n
        )));
    }
    let m_breve = m.max(p);
    let n_breve = n.min(m + n - p);
    let p_breve = m.min(p);
    let denom = (m_breve + n_breve - 1) as f64;
    let lo = (p_breve.min(n_breve) as f64 - 0.5) / denom;
    let hi = (p_breve.max(n_breve) as f64 - 0.5) / denom;
    let gamma_angle = 2.0 * lo.sqrt().asin();
    let psi_angle = 2.0 * hi.sqrt().asin();
    let mu_j = ((gamma_angle + psi_angle) / 2.0).tan().powi(2);
    let sigma3 = 16.0 * mu_j.powi(3)
        / (denom * denom)
        / (gamma_angle.sin() * psi_angle.sin() * (gamma_angle + psi_angle).sin().powi(2));
    let sigma_j = sigma3.cbrt();
    let angles_ok = [gamma_angle, psi_angle].iter().all(|a| *a > 0.0 && *a < PI);
    if !(angles_ok && mu_j.is_finite() && sigma_j.is_finite() && sigma_j > 0.0) {
        return Err(Error::Precondition(format!(
            "Jacobi centering is ill-posed for m = {m}, n = {n}, p = {p}"
        )));
    }
    Ok(JacobiCentering {
        m,
        n,
        p,
        m_breve,
        n_breve,
        p_breve,
        gamma_angle,
        psi_angle,
        mu_j,
        sigma_j,
    })
}

impl JacobiCentering {
    /// `((n̆/m̆)λ₁ − μ_J)/σ_J` for the largest root `λ₁` of `det(λA − B) = 0`.
    pub fn normalize_root(&self, lambda1: f64) -> f64 {
        (self.n_breve as f64 / self.m_breve as f64 * lambda1 - self.mu_j) / self.sigma_j
    }

    /// Same statistic from `θ = λ_max(W_m⁻¹ W_n)` of the unscaled Wishart pair,
    /// since `(n̆/m̆)λ₁ = θ`.
    pub fn normalize_ratio(&self, theta: f64) -> f64 {
        (theta - self.mu_j) / self.sigma_j
    }
}

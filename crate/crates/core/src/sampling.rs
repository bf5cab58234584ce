//! Seeded random streams and the noise families used by the simulations.
//!
//! Every replicate draws from its own ChaCha8 stream indexed by
//! `(seed, replicate)`, so results do not depend on how replicates are
//! scheduled across threads.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::tridiagonal_eigenvalues;

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fills `out` with standard normals by Marsaglia's polar method.
pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut i = 0;
    while i < out.len() {
        let (u, v, s) = loop {
            let u: f64 = rng.gen::<f64>() * 2.0 - 1.0;
            let v: f64 = rng.gen::<f64>() * 2.0 - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                break (u, v, s);
            }
        };
        let f = (-2.0 * s.ln() / s).sqrt();
        out[i] = u * f;
        if i + 1 < out.len() {
            out[i + 1] = v * f;
        }
        i += 2;
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let mut z = [0.0];
    fill_standard_normal(rng, &mut z);
    z[0]
}

/// `n × p` matrix of i.i.d. standard normals.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, p);
    fill_standard_normal(rng, m.as_mut_slice());
    m
}

/// Chi-square draw with `df` degrees of freedom.
pub fn chi_square<R: Rng + ?Sized>(rng: &mut R, df: f64) -> Result<f64> {
    let d = ChiSquared::new(df)
        .map_err(|e| Error::Parameter(format!("chi-square df {df}: {e}")))?;
    Ok(d.sample(rng))
}

/// Eigenvalues (descending) of `XᵀX` for an `n × p` standard Gaussian `X`,
/// `p <= n`, whose first column is multiplied by `first_scale`.
///
/// Householder bidiagonalization reduces such an `X` to an upper-bidiagonal
/// matrix with independent chi entries: diagonal `first_scale·χ_n, χ_{n−1},
/// …, χ_{n−p+1}` and superdiagonal `χ_{p−1}, …, χ_1`. The spectrum then costs
/// `O(p²)` instead of `O(np²)`.
pub fn wishart_bidiagonal_eigenvalues<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    p: usize,
    first_scale: f64,
) -> Result<Vec<f64>> {
    if p == 0 || n < p {
        return Err(Error::Config(format!(
            "bidiagonal sampler needs 1 <= p <= n (n = {n}, p = {p})"
        )));
    }
    let d: Vec<f64> = (0..p)
        .map(|i| {
            let c = chi_square(rng, (n - i) as f64)?.sqrt();
            Ok(if i == 0 { first_scale * c } else { c })
        })
        .collect::<Result<_>>()?;
    let e: Vec<f64> = (1..p)
        .map(|i| chi_square(rng, (p - i) as f64).map(f64::sqrt))
        .collect::<Result<_>>()?;
    let diag: Vec<f64> = (0..p)
        .map(|i| d[i] * d[i] + if i > 0 { e[i - 1] * e[i - 1] } else { 0.0 })
        .collect();
    let off: Vec<f64> = (0..p - 1).map(|i| d[i] * e[i]).collect();
    let mut ev = tridiagonal_eigenvalues(&diag, &off)?;
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Noise distributions, standardized to unit variance where one exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    Gaussian,
    /// Student t with 5 degrees of freedom, scaled by `√(3/5)`.
    T5,
    /// Standard Cauchy (no variance, left unscaled).
    Cauchy,
    /// Laplace with scale `1/√2`.
    Laplace,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 4] = [
        NoiseFamily::Gaussian,
        NoiseFamily::T5,
        NoiseFamily::Cauchy,
        NoiseFamily::Laplace,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::T5 => "t5",
            NoiseFamily::Cauchy => "cauchy",
            NoiseFamily::Laplace => "laplace",
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            NoiseFamily::Gaussian => fill_standard_normal(rng, out),
            NoiseFamily::T5 => {
                let chi = ChiSquared::new(5.0).expect("valid df");
                let scale = (3.0f64 / 5.0).sqrt();
                for v in out.iter_mut() {
                    let z = standard_normal(rng);
                    let c: f64 = chi.sample(rng);
                    *v = scale * z / (c / 5.0).sqrt();
                }
            }
            NoiseFamily::Cauchy => {
                for v in out.iter_mut() {
                    let u: f64 = rng.gen();
                    *v = (std::f64::consts::PI * (u - 0.5)).tan();
                }
            }
            NoiseFamily::Laplace => {
                let b = std::f64::consts::FRAC_1_SQRT_2;
                for v in out.iter_mut() {
                    let u: f64 = rng.gen::<f64>() - 0.5;
                    *v = -b * u.signum() * (1.0 - 2.0 * u.abs()).ln();
                }
            }
        }
    }

    pub fn matrix<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, p: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, p);
        self.fill(rng, m.as_mut_slice());
        m
    }
}

impl FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(NoiseFamily::Gaussian),
            "t5" | "student-t5" => Ok(NoiseFamily::T5),
            "cauchy" => Ok(NoiseFamily::Cauchy),
            "laplace" => Ok(NoiseFamily::Laplace),
            other => Err(Error::Config(format!("unknown noise family {other:?}"))),
        }
    }
}

//! Sequential Tracy–Widom thresholding for the number of signals in noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{eigenvalues_psd, sample_covariance_with_divisor, DataMatrix, Spectrum};
use crate::tracy_widom::{signal_centering, TracyWidomTable};

/// Mean of the trailing `p − k` eigenvalues.
pub fn noise_variance_estimate(spectrum: &Spectrum, k: usize) -> Result<f64> {
    let p = spectrum.dim();
    if k >= p {
        return Err(Error::Domain(format!("noise estimate needs k < p (k = {k}, p = {p})")));
    }
    let tail = &spectrum.eigenvalues()[k..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// `C_{n,p,k}(α) = μ_{n,p−k} + s(α) ξ_{n,p−k}` with `s(α)` the upper-α
/// Tracy–Widom quantile.
pub fn signal_threshold(
    n: usize,
    p: usize,
    k: usize,
    alpha: f64,
    tw: &TracyWidomTable,
) -> Result<f64> {
    if k >= p {
        return Err(Error::Precondition(format!("threshold needs p - k >= 1 (k = {k}, p = {p})")));
    }
    let c = signal_centering(n, p - k)?;
    Ok(c.mu + tw.quantile(1.0 - alpha)? * c.xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalDetectionConfig {
    pub alpha: f64,
    /// Largest `k` tested; `None` means `min(p, n) − 1`.
    pub max_k: Option<usize>,
}

impl SignalDetectionConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Self { alpha, max_k: None })
    }

    pub fn with_max_k(mut self, max_k: usize) -> Result<Self> {
        if max_k == 0 {
            return Err(Error::Config("max_k must be at least 1".into()));
        }
        self.max_k = Some(max_k);
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalStep {
    pub k: usize,
    pub eigenvalue: f64,
    pub sigma2: f64,
    pub threshold: f64,
    pub exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalDetectionTrace {
    pub steps: Vec<SignalStep>,
    pub k_hat: usize,
    /// Every tested eigenvalue exceeded its threshold; `k_hat` is then only a
    /// lower bound.
    pub saturated: bool,
    pub alpha: f64,
    pub s_alpha: f64,
}

impl SignalDetectionTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,l_k,sigma2_k,threshold,exceeded\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{}\n",
                s.k, s.eigenvalue, s.sigma2, s.threshold, s.exceeded
            ));
        }
        out
    }
}

/// Tests `ℓ_k > σ̂²(k) C_{n,p,k}(α)` for `k = 1, 2, …` and stops at the first
/// failure; the estimate is that `k` minus one. `spectrum` holds the
/// eigenvalues of a sample covariance with divisor `n`.
pub fn estimate_signal_count(
    spectrum: &Spectrum,
    n: usize,
    config: &SignalDetectionConfig,
    tw: &TracyWidomTable,
) -> Result<SignalDetectionTrace> {
    let p = spectrum.dim();
    if p == 0 {
        return Err(Error::Input("empty spectrum".into()));
    }
    if p < 2 {
        return Err(Error::Precondition("signal detection needs p >= 2".into()));
    }
    if n < 2 {
        return Err(Error::Precondition(format!("signal detection needs n >= 2, got {n}")));
    }
    let default_max = p.min(n) - 1;
    let max_k = config.max_k.unwrap_or(default_max).min(p - 1);
    let s_alpha = tw.quantile(1.0 - config.alpha)?;
    let l = spectrum.eigenvalues();
    let mut steps = Vec::new();
    let mut k_hat = None;
    for k in 1..=max_k {
        let sigma2 = noise_variance_estimate(spectrum, k)?;
        let c = signal_centering(n, p - k)?;
        let threshold = sigma2 * (c.mu + s_alpha * c.xi);
        let exceeded = l[k - 1] > threshold;
        steps.push(SignalStep { k, eigenvalue: l[k - 1], sigma2, threshold, exceeded });
        if !exceeded {
            k_hat = Some(k - 1);
            break;
        }
    }
    let saturated = k_hat.is_none();
    Ok(SignalDetectionTrace {
        k_hat: k_hat.unwrap_or(max_k),
        saturated,
        steps,
        alpha: config.alpha,
        s_alpha,
    })
}

/// Eigenvalues of `XᵀX/n` (or of the mean-centered scatter over `n`).
pub fn signal_spectrum(data: &DataMatrix, center: bool) -> Result<Spectrum> {
    let s = sample_covariance_with_divisor(data, center, data.n() as f64)?;
    eigenvalues_psd(&s)
}

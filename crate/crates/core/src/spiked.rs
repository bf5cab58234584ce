//! Spiked covariance diagnostics: phase-transition limits of the top sample
//! eigenvalues, their super-critical fluctuation, and simulation helpers.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{fill_standard_normal, stream_rng, wishart_bidiagonal_eigenvalues};
use crate::spectral::{eigenvalues_psd, Spectrum};

/// `Σ = σ² diag(ℓ₁, …, ℓ_M, 1, …, 1)` with aspect ratio `γ = p/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikedModel {
    pub spikes: Vec<f64>,
    pub gamma: f64,
    pub sigma2: f64,
}

impl SpikedModel {
    /// Spikes are sorted descending; each must be at least 1.
    pub fn new(mut spikes: Vec<f64>, gamma: f64, sigma2: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Parameter(format!("sigma2 must be positive, got {sigma2}")));
        }
        if let Some(&l) = spikes.iter().find(|l| !(**l >= 1.0 && l.is_finite())) {
            return Err(Error::Domain(format!("spike {l} is below the noise level 1")));
        }
        spikes.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { spikes, gamma, sigma2 })
    }

    pub fn threshold(&self) -> f64 {
        1.0 + self.gamma.sqrt()
    }
}

/// Almost-sure limit of the sample eigenvalue attached to spike `ell`:
/// `ℓ(1 + γ/(ℓ − 1))` above `1 + √γ`, the bulk edge `(1 + √γ)²` otherwise.
pub fn bbp_limit(ell: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    if !(ell >= 1.0) {
        return Err(Error::Domain(format!("spike {ell} is below the noise level 1")));
    }
    let rg = gamma.sqrt();
    if ell > 1.0 + rg {
        Ok(ell * (1.0 + gamma / (ell - 1.0)))
    } else {
        Ok((1.0 + rg).powi(2))
    }
}

/// `σ²(ℓ) = 2ℓ²(1 − γ/(ℓ − 1)²)`, the variance of `√n(λ̂ − limit)`.
pub fn spike_fluctuation_variance(ell: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    let thr = 1.0 + gamma.sqrt();
    if !(ell > thr) {
        return Err(Error::Domain(format!(
            "spike {ell} is not above the phase transition 1 + sqrt(gamma) = {thr}; \
             its eigenvalue sticks to the bulk edge and has no Gaussian fluctuation"
        )));
    }
    Ok(2.0 * ell * ell * (1.0 - gamma / (ell - 1.0).powi(2)))
}

pub fn spike_fluctuation_sd(ell: f64, gamma: f64) -> Result<f64> {
    spike_fluctuation_variance(ell, gamma).map(f64::sqrt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeClassification {
    pub index: usize,
    pub ell: f64,
    pub detectable: bool,
    /// Limit of the matching sample eigenvalue, scaled by `σ²`.
    pub limit: f64,
    pub warning: Option<String>,
}

/// Labels each spike detectable iff `ℓ > 1 + √γ` (a spike exactly at the
/// threshold is undetectable).
pub fn classify_spikes(model: &SpikedModel) -> Vec<SpikeClassification> {
    let thr = model.threshold();
    model
        .spikes
        .iter()
        .enumerate()
        .map(|(i, &ell)| {
            let detectable = ell > thr;
            let limit = model.sigma2 * bbp_limit(ell, model.gamma).expect("validated model");
            let warning = (!detectable).then(|| {
                format!(
                    "spike {ell} <= 1 + sqrt(gamma) = {thr:.6}: sample eigenvalue sticks to the bulk \
                     edge and the sample eigenvector is asymptotically orthogonal to the population one"
                )
            });
            SpikeClassification { index: i + 1, ell, detectable, limit, warning }
        })
        .collect()
}

/// Eigenvalues of `XᵀX/n` for `n` rows drawn from `N(0, σ² diag(spikes, 1, …))`.
pub fn sample_spiked_spectrum<R: Rng + ?Sized>(
    rng: &mut R,
    spikes: &[f64],
    sigma2: f64,
    n: usize,
    p: usize,
) -> Result<Spectrum> {
    if spikes.len() > p {
        return Err(Error::Config(format!("{} spikes exceed dimension {p}", spikes.len())));
    }
    if n == 0 || p == 0 {
        return Err(Error::Config("n and p must be positive".into()));
    }
    let mut buf = vec![0.0; n * p];
    fill_standard_normal(rng, &mut buf);
    let mut x = DMatrix::from_vec(n, p, buf);
    for (j, &l) in spikes.iter().enumerate() {
        x.column_mut(j).scale_mut((l * sigma2).sqrt());
    }
    if spikes.len() < p && sigma2 != 1.0 {
        for j in spikes.len()..p {
            x.column_mut(j).scale_mut(sigma2.sqrt());
        }
    }
    let mut s = x.tr_mul(&x);
    s /= n as f64;
    eigenvalues_psd(&s)
}

/// Largest eigenvalue of `XᵀX/n` under a single spike `ell`, drawn through
/// the chi-distributed bidiagonal form of `X`.
pub fn sample_single_spike_top<R: Rng + ?Sized>(
    rng: &mut R,
    ell: f64,
    n: usize,
    p: usize,
) -> Result<f64> {
    if !(ell >= 1.0) {
        return Err(Error::Domain(format!("spike {ell} is below the noise level 1")));
    }
    Ok(wishart_bidiagonal_eigenvalues(rng, n, p, ell.sqrt())?[0] / n as f64)
}

/// Replicate summary of the top sample eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikedSimulation {
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub seed: u64,
    /// Mean of the j-th largest sample eigenvalue, one entry per spike.
    pub mean_top: Vec<f64>,
    pub sd_top: Vec<f64>,
    pub limits: Vec<f64>,
}

pub fn simulate_spiked(
    model: &SpikedModel,
    n: usize,
    p: usize,
    reps: usize,
    seed: u64,
) -> Result<SpikedSimulation> {
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    let m = model.spikes.len().max(1);
    let tops: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let s = sample_spiked_spectrum(&mut rng, &model.spikes, model.sigma2, n, p)?;
            Ok(s.eigenvalues()[..m.min(p)].to_vec())
        })
        .collect::<Result<_>>()?;
    let k = m.min(p);
    let mut mean_top = vec![0.0; k];
    let mut sd_top = vec![0.0; k];
    for j in 0..k {
        let xs: Vec<f64> = tops.iter().map(|t| t[j]).collect();
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let var = if reps > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64
        } else {
            0.0
        };
        mean_top[j] = mean;
        sd_top[j] = var.sqrt();
    }
    let gamma = p as f64 / n as f64;
    let limits = (0..k)
        .map(|j| {
            let ell = model.spikes.get(j).copied().unwrap_or(1.0);
            bbp_limit(ell, gamma).map(|v| v * model.sigma2)
        })
        .collect::<Result<_>>()?;
    Ok(SpikedSimulation { n, p, reps, seed, mean_top, sd_top, limits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn limits_at_reference_points() {
        assert!((bbp_limit(1.5, 0.25).unwrap() - 2.25).abs() < 1e-15);
        assert!((bbp_limit(2.5, 0.25).unwrap() - 2.5 * (1.0 + 0.25 / 1.5)).abs() < 1e-15);
        assert!((bbp_limit(1.0, 0.3).unwrap() - (1.0 + 0.3f64.sqrt()).powi(2)).abs() < 1e-15);
        assert!(matches!(bbp_limit(0.9, 0.3), Err(Error::Domain(_))));
        let v = spike_fluctuation_variance(2.5, 0.25).unwrap();
        assert!((v - 12.5 * (1.0 - 0.25 / 2.25)).abs() < 1e-12);
        assert!((spike_fluctuation_sd(2.5, 0.25).unwrap() - v.sqrt()).abs() < 1e-15);
        match spike_fluctuation_sd(1.4, 0.25) {
            Err(Error::Domain(m)) => assert!(m.contains("phase transition")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn variance_shrinks_toward_threshold() {
        let g = 0.25;
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let ell = 1.5 + 0.5 * 0.8f64.powi(i);
            let v = spike_fluctuation_variance(ell, g).unwrap();
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn classification_of_figure_model() {
        let m = SpikedModel::new(vec![1.5, 2.5], 0.25, 1.0).unwrap();
        let c = classify_spikes(&m);
        assert!(c[0].detectable && (c[0].limit - 2.5 * (1.0 + 0.25 / 1.5)).abs() < 1e-12);
        assert!(!c[1].detectable && c[1].warning.is_some());
        assert!((c[1].limit - 2.25).abs() < 1e-12);
        let flat = SpikedModel::new(vec![1.0; 3], 0.5, 1.0).unwrap();
        assert!(classify_spikes(&flat).iter().all(|s| !s.detectable));
        let tiny = SpikedModel::new(vec![3.0], 1e-10, 1.0).unwrap();
        assert!((classify_spikes(&tiny)[0].limit - 3.0).abs() < 1e-8);
    }

    #[test]
    fn bidiagonal_sampler_matches_dense() {
        let (n, p, reps, ell) = (120, 40, 400, 3.0);
        let dense: f64 = (0..reps)
            .map(|r| {
                let mut rng = stream_rng(77, r);
                sample_spiked_spectrum(&mut rng, &[ell], 1.0, n, p).unwrap().largest()
            })
            .sum::<f64>()
            / reps as f64;
        let bidiag: f64 = (0..reps)
            .map(|r| sample_single_spike_top(&mut stream_rng(78, r), ell, n, p).unwrap())
            .sum::<f64>()
            / reps as f64;
        // sd of λ̂₁ is about σ(ℓ)/√n ≈ 0.37, so the mean SE is ≈ 0.02.
        assert!((dense - bidiag).abs() < 0.08, "dense {dense}, bidiagonal {bidiag}");
    }

    #[test]
    fn simulation_is_deterministic() {
        let m = SpikedModel::new(vec![4.0], 0.25, 1.0).unwrap();
        let a = simulate_spiked(&m, 80, 20, 8, 5).unwrap();
        let b = simulate_spiked(&m, 80, 20, 8, 5).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn limit_monotone_and_above_edge(g in 0.01f64..4.0, a in 1.0f64..20.0, b in 1.0f64..20.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let edge = (1.0 + g.sqrt()).powi(2);
            let llo = bbp_limit(lo, g).unwrap();
            let lhi = bbp_limit(hi, g).unwrap();
            prop_assert!(llo <= lhi * (1.0 + 1e-14));
            prop_assert!(llo >= edge * (1.0 - 1e-14));
            if lo > 1.0 + g.sqrt() + 1e-9 {
                prop_assert!(llo > edge);
            } else {
                prop_assert_eq!(llo, edge);
            }
        }

        #[test]
        fn limit_continuous_at_threshold(g in 0.01f64..4.0, eps in 1e-12f64..1e-6) {
            let t = 1.0 + g.sqrt();
            let above = bbp_limit(t + eps, g).unwrap();
            let at = bbp_limit(t, g).unwrap();
            prop_assert!((above - at).abs() < 1e-5 * at);
        }
    }
}

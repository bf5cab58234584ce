//! Seeded Monte Carlo experiments, ensemble generators and plot-data output.
//!
//! Replicate `r` of case `c` always draws from stream `(seed, c·2⁴⁰ + r)`, so
//! every output depends only on the configuration, never on the thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::changepoint::{default_min_seg, false_positive_rate, ratio_binseg, SegmentationConfig};
use crate::error::{Error, Result};
use crate::laws::{density_curve, MpLaw};
use crate::sampling::{fill_standard_normal, stream_rng, wishart_bidiagonal_eigenvalues, NoiseFamily};
use crate::signals::{estimate_signal_count, signal_spectrum, SignalDetectionConfig};
use crate::spectral::DataMatrix;
use crate::spiked::sample_spiked_spectrum;
use crate::tracy_widom::{wishart_centering, TracyWidomTable};

fn case_stream(case: usize, rep: usize) -> u64 {
    ((case as u64) << 40) | rep as u64
}

/// Segment covariances for changepoint series: even segments have `Σ = I`,
/// odd segments `Q diag(2, …, 2, 1, …, 1) Qᵀ` with the first `⌈p/2⌉` entries
/// equal to 2 and `Q` a Haar-distributed rotation drawn once per series.
pub const FPR_GENERATOR: &str =
    "alternating segments: identity, then Q diag(2 (first ceil(p/2)), 1 (rest)) Q^T with Q Haar-random per series";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnsembleSpec {
    WhiteWishart { n: usize, p: usize, noise: NoiseFamily },
    /// Rows `x = Σ_k √(ℓ_k − 1) s_k e_k + z`: Gaussian signals `s`, noise `z`
    /// from `noise`. With Gaussian noise this is `N(0, diag(ℓ, 1, …, 1))`.
    Spiked { n: usize, p: usize, spikes: Vec<f64>, noise: NoiseFamily },
    FPair { n1: usize, n2: usize, p: usize, noise: NoiseFamily },
    ChangepointSeries { n: usize, p: usize, changepoints: Vec<usize>, noise: NoiseFamily },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ensemble {
    Single(DataMatrix),
    Pair(DataMatrix, DataMatrix),
    Series { data: DataMatrix, changepoints: Vec<usize> },
}

impl Ensemble {
    pub fn primary(&self) -> &DataMatrix {
        match self {
            Ensemble::Single(d) | Ensemble::Pair(d, _) | Ensemble::Series { data: d, .. } => d,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        match self {
            EnsembleSpec::WhiteWishart { n, p, .. } => {
                pos("n", *n)?;
                pos("p", *p)
            }
            EnsembleSpec::Spiked { n, p, spikes, .. } => {
                pos("n", *n)?;
                pos("p", *p)?;
                if spikes.len() > *p {
                    return Err(Error::Config(format!("{} spikes exceed p = {p}", spikes.len())));
                }
                if let Some(l) = spikes.iter().find(|l| !(**l >= 1.0 && l.is_finite())) {
                    return Err(Error::Config(format!("spike {l} is below 1")));
                }
                Ok(())
            }
            EnsembleSpec::FPair { n1, n2, p, .. } => {
                pos("n1", *n1)?;
                pos("n2", *n2)?;
                pos("p", *p)
            }
            EnsembleSpec::ChangepointSeries { n, p, changepoints, .. } => {
                pos("n", *n)?;
                pos("p", *p)?;
                let mut prev = 0;
                for &c in changepoints {
                    if c <= prev || c >= *n {
                        return Err(Error::Config(format!(
                            "changepoints must be increasing and inside (0, {n}), got {changepoints:?}"
                        )));
                    }
                    prev = c;
                }
                Ok(())
            }
        }
    }
}

/// Uniformly random rotation from the QR factorization of a Gaussian matrix,
/// with column signs fixed by the diagonal of `R`.
pub fn haar_orthogonal<R: Rng + ?Sized>(rng: &mut R, p: usize) -> DMatrix<f64> {
    let mut buf = vec![0.0; p * p];
    fill_standard_normal(rng, &mut buf);
    let qr = DMatrix::from_vec(p, p, buf).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn generate_ensemble<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<Ensemble> {
    spec.validate()?;
    Ok(match spec {
        EnsembleSpec::WhiteWishart { n, p, noise } => {
            Ensemble::Single(DataMatrix::new(noise.matrix(rng, *n, *p))?)
        }
        EnsembleSpec::Spiked { n, p, spikes, noise } => {
            let mut x = noise.matrix(rng, *n, *p);
            let mut s = vec![0.0; *n];
            for (k, &l) in spikes.iter().enumerate() {
                fill_standard_normal(rng, &mut s);
                let a = (l - 1.0).sqrt();
                for (i, v) in s.iter().enumerate() {
                    x[(i, k)] += a * v;
                }
            }
            Ensemble::Single(DataMatrix::new(x)?)
        }
        EnsembleSpec::FPair { n1, n2, p, noise } => Ensemble::Pair(
            DataMatrix::new(noise.matrix(rng, *n1, *p))?,
            DataMatrix::new(noise.matrix(rng, *n2, *p))?,
        ),
        EnsembleSpec::ChangepointSeries { n, p, changepoints, noise } => {
            let q = haar_orthogonal(rng, *p);
            let half = p.div_ceil(2);
            // Row map z ↦ z D^{1/2} Qᵀ gives covariance Q D Qᵀ.
            let mut odd = q.transpose();
            for j in 0..half {
                odd.row_mut(j).scale_mut(2f64.sqrt());
            }
            let mut x = noise.matrix(rng, *n, *p);
            let mut bounds = vec![0];
            bounds.extend(changepoints.iter().copied());
            bounds.push(*n);
            for (seg, w) in bounds.windows(2).enumerate() {
                if seg % 2 == 1 {
                    let rows = x.rows(w[0], w[1] - w[0]) * &odd;
                    x.rows_mut(w[0], w[1] - w[0]).copy_from(&rows);
                }
            }
            Ensemble::Series { data: DataMatrix::new(x)?, changepoints: changepoints.clone() }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Table1,
    SignalsFigure,
    Fpr,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Table1 => "table1",
            ExperimentKind::SignalsFigure => "signals-figure",
            ExperimentKind::Fpr => "fpr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Cases to run; empty means the experiment's default grid.
    pub dims: Vec<Dims>,
    pub reps: usize,
    /// Restrict to one noise family (signal figure only).
    pub noise: Option<NoiseFamily>,
    pub seed: u64,
    pub alpha: f64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, reps: usize, seed: u64) -> Self {
        let alpha = match experiment {
            ExperimentKind::SignalsFigure => 0.005,
            _ => 0.05,
        };
        Self { experiment, dims: Vec::new(), reps, noise: None, seed, alpha, output: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.dims.iter().any(|d| d.n == 0 || d.p == 0) {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        Ok(())
    }
}

pub const TABLE1_PERCENTILES: [f64; 9] = [-3.90, -3.18, -2.78, -1.91, -1.27, -0.59, 0.45, 0.98, 2.02];
pub const TABLE1_TW: [f64; 9] = [0.01, 0.05, 0.10, 0.30, 0.50, 0.70, 0.90, 0.95, 0.99];
/// `(n, p)` for the six published columns.
pub const TABLE1_CASES: [Dims; 6] = [
    Dims { n: 5, p: 5 },
    Dims { n: 10, p: 10 },
    Dims { n: 100, p: 100 },
    Dims { n: 20, p: 5 },
    Dims { n: 40, p: 10 },
    Dims { n: 400, p: 100 },
];
pub const TABLE1_PUBLISHED: [[f64; 9]; 6] = [
    [0.000, 0.003, 0.019, 0.211, 0.458, 0.697, 0.901, 0.948, 0.988],
    [0.001, 0.015, 0.049, 0.251, 0.480, 0.707, 0.907, 0.954, 0.991],
    [0.007, 0.042, 0.089, 0.299, 0.500, 0.703, 0.903, 0.950, 0.991],
    [0.002, 0.029, 0.075, 0.304, 0.539, 0.739, 0.919, 0.960, 0.992],
    [0.003, 0.039, 0.089, 0.307, 0.524, 0.733, 0.918, 0.961, 0.993],
    [0.010, 0.049, 0.102, 0.303, 0.508, 0.714, 0.908, 0.957, 0.992],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Case {
    pub n: usize,
    pub p: usize,
    pub empirical: Vec<f64>,
    /// Binomial standard error of each empirical probability.
    pub se: Vec<f64>,
    pub published: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Result {
    pub reps: usize,
    pub seed: u64,
    pub percentiles: Vec<f64>,
    pub tw_limit: Vec<f64>,
    pub tw_published: Vec<f64>,
    pub cases: Vec<Table1Case>,
}

impl Table1Result {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("percentile,tw_published,tw_computed");
        for c in &self.cases {
            let _ = write!(out, ",p{}xn{},se_p{}xn{}", c.p, c.n, c.p, c.n);
        }
        out.push('\n');
        for i in 0..self.percentiles.len() {
            let _ = write!(out, "{:.2},{:.2},{:.6}", self.percentiles[i], self.tw_published[i], self.tw_limit[i]);
            for c in &self.cases {
                let _ = write!(out, ",{:.6},{:.6}", c.empirical[i], c.se[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// Largest eigenvalues of `W_p(n, I)`, normalized by the Wishart centering,
/// scored against the nine tabulated percentiles.
pub fn run_table1(config: &ExperimentConfig, tw: &TracyWidomTable) -> Result<Table1Result> {
    config.validate()?;
    let cases: Vec<Dims> = if config.dims.is_empty() { TABLE1_CASES.to_vec() } else { config.dims.clone() };
    let mut out = Vec::with_capacity(cases.len());
    for (ci, d) in cases.iter().enumerate() {
        if d.p > d.n {
            return Err(Error::Config(format!("table1 cases need p <= n, got n = {}, p = {}", d.n, d.p)));
        }
        let c = wishart_centering(d.n, d.p)?;
        let stats: Vec<f64> = (0..config.reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(config.seed, case_stream(ci, r));
                Ok(c.normalize(wishart_bidiagonal_eigenvalues(&mut rng, d.n, d.p, 1.0)?[0]))
            })
            .collect::<Result<_>>()?;
        let rf = config.reps as f64;
        let empirical: Vec<f64> = TABLE1_PERCENTILES
            .iter()
            .map(|&x| stats.iter().filter(|&&s| s <= x).count() as f64 / rf)
            .collect();
        let se = TABLE1_TW.iter().map(|&q| (q * (1.0 - q) / rf).sqrt()).collect();
        let published = TABLE1_CASES
            .iter()
            .position(|t| t == d)
            .map(|i| TABLE1_PUBLISHED[i].to_vec());
        out.push(Table1Case { n: d.n, p: d.p, empirical, se, published });
    }
    Ok(Table1Result {
        reps: config.reps,
        seed: config.seed,
        percentiles: TABLE1_PERCENTILES.to_vec(),
        tw_limit: TABLE1_PERCENTILES.iter().map(|&x| tw.cdf(x)).collect(),
        tw_published: TABLE1_TW.to_vec(),
        cases: out,
    })
}

/// Signal variance of every planted component, in units of the noise variance.
pub const SIGNAL_STRENGTH: f64 = 10.0;
pub const SIGNAL_DIM: usize = 100;
pub const SIGNAL_SAMPLE_SIZES: [usize; 5] = [100, 500, 1000, 2000, 5000];
pub const SIGNAL_COUNTS: [usize; 4] = [2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalCell {
    pub noise: NoiseFamily,
    pub n: usize,
    pub p: usize,
    pub k_true: usize,
    pub mean_k_hat: f64,
    pub frac_correct: f64,
    pub frac_saturated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFigureResult {
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub strength: f64,
    pub cells: Vec<SignalCell>,
}

impl SignalFigureResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("noise,n,p,k_true,mean_k_hat,frac_correct,frac_saturated\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6}",
                c.noise.name(),
                c.n,
                c.p,
                c.k_true,
                c.mean_k_hat,
                c.frac_correct,
                c.frac_saturated
            );
        }
        out
    }
}

/// Estimated signal count for one replicate of the planted-signal model.
pub fn signal_replicate(
    noise: NoiseFamily,
    n: usize,
    p: usize,
    k: usize,
    strength: f64,
    alpha: f64,
    seed: u64,
    stream: u64,
    tw: &TracyWidomTable,
) -> Result<(usize, bool)> {
    let mut rng = stream_rng(seed, stream);
    let spec = EnsembleSpec::Spiked { n, p, spikes: vec![1.0 + strength; k], noise };
    let spectrum = if noise == NoiseFamily::Gaussian && k == 0 && p <= n {
        // Exact white Wishart spectrum at O(p²) cost.
        let ev = wishart_bidiagonal_eigenvalues(&mut rng, n, p, 1.0)?;
        crate::spectral::Spectrum::new(ev.into_iter().map(|v| v / n as f64).collect())?
    } else if noise == NoiseFamily::Gaussian {
        sample_spiked_spectrum(&mut rng, &vec![1.0 + strength; k], 1.0, n, p)?
    } else {
        signal_spectrum(generate_ensemble(&spec, &mut rng)?.primary(), false)?
    };
    let tr = estimate_signal_count(&spectrum, n, &SignalDetectionConfig::new(alpha)?, tw)?;
    Ok((tr.k_hat, tr.saturated))
}

pub fn run_signal_figure(config: &ExperimentConfig, tw: &TracyWidomTable) -> Result<SignalFigureResult> {
    config.validate()?;
    let families: Vec<NoiseFamily> = match config.noise {
        Some(f) => vec![f],
        None => NoiseFamily::ALL.to_vec(),
    };
    let dims: Vec<Dims> = if config.dims.is_empty() {
        SIGNAL_SAMPLE_SIZES.iter().map(|&n| Dims { n, p: SIGNAL_DIM }).collect()
    } else {
        config.dims.clone()
    };
    let mut grid = Vec::new();
    for &f in &families {
        for d in &dims {
            for &k in &SIGNAL_COUNTS {
                if k < d.p {
                    grid.push((f, *d, k));
                }
            }
        }
    }
    let mut cells = Vec::with_capacity(grid.len());
    for (ci, &(noise, d, k)) in grid.iter().enumerate() {
        let res: Vec<(usize, bool)> = (0..config.reps)
            .into_par_iter()
            .map(|r| {
                signal_replicate(noise, d.n, d.p, k, SIGNAL_STRENGTH, config.alpha, config.seed, case_stream(ci, r), tw)
            })
            .collect::<Result<_>>()?;
        let rf = config.reps as f64;
        cells.push(SignalCell {
            noise,
            n: d.n,
            p: d.p,
            k_true: k,
            mean_k_hat: res.iter().map(|r| r.0 as f64).sum::<f64>() / rf,
            frac_correct: res.iter().filter(|r| r.0 == k).count() as f64 / rf,
            frac_saturated: res.iter().filter(|r| r.1).count() as f64 / rf,
        });
    }
    Ok(SignalFigureResult {
        reps: config.reps,
        seed: config.seed,
        alpha: config.alpha,
        strength: SIGNAL_STRENGTH,
        cells,
    })
}

/// `(p, n, published ratio FPR under the two assumption sets)`.
pub const FPR_ROWS: [(usize, usize, f64, f64); 11] = [
    (3, 500, 0.24, 0.10),
    (3, 1000, 0.28, 0.14),
    (3, 2000, 0.31, 0.16),
    (3, 5000, 0.31, 0.17),
    (10, 500, 0.16, 0.23),
    (10, 1000, 0.13, 0.24),
    (10, 2000, 0.10, 0.24),
    (10, 5000, 0.09, 0.19),
    (30, 2000, 0.02, 0.03),
    (30, 5000, 0.02, 0.03),
    (100, 5000, 0.00, 0.00),
];
pub const FPR_WINDOW: usize = 20;
pub const FPR_CHANGES: usize = 3;

/// Minimum segment length used by the FPR experiment.
pub fn fpr_min_seg(p: usize) -> usize {
    default_min_seg(p)
}

/// Equally spaced true changepoints.
pub fn fpr_changepoints(n: usize) -> Vec<usize> {
    (1..=FPR_CHANGES).map(|i| i * n / (FPR_CHANGES + 1)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FprRow {
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    pub min_seg: usize,
    pub true_changes: Vec<usize>,
    /// Mean over replicates of the per-replicate FPR.
    pub fpr: f64,
    pub fpr_se: f64,
    pub mean_detected: f64,
    /// Fraction of true changes matched within the window.
    pub recall: f64,
    pub published: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FprResult {
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub window: usize,
    pub generator: String,
    pub rows: Vec<FprRow>,
}

impl FprResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,n,reps,min_seg,fpr,fpr_se,mean_detected,recall,published_a,published_b\n");
        for r in &self.rows {
            let (a, b) = r.published.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{a},{b}",
                r.p, r.n, r.reps, r.min_seg, r.fpr, r.fpr_se, r.mean_detected, r.recall
            );
        }
        out
    }
}

pub fn run_fpr_row(p: usize, n: usize, reps: usize, alpha: f64, seed: u64, case: usize) -> Result<FprRow> {
    let min_seg = fpr_min_seg(p);
    let truth = fpr_changepoints(n);
    let cfg = SegmentationConfig::new(alpha, min_seg)?;
    let spec = EnsembleSpec::ChangepointSeries { n, p, changepoints: truth.clone(), noise: NoiseFamily::Gaussian };
    let per_rep: Vec<(f64, usize, usize)> = (0..reps)
        .map(|r| {
            let mut rng = stream_rng(seed, case_stream(case, r));
            let e = generate_ensemble(&spec, &mut rng)?;
            let found = ratio_binseg(e.primary(), &cfg)?.changepoints;
            let hit = truth.iter().filter(|&&t| found.iter().any(|&d| d.abs_diff(t) <= FPR_WINDOW)).count();
            Ok((false_positive_rate(&found, &truth, FPR_WINDOW), found.len(), hit))
        })
        .collect::<Result<_>>()?;
    let rf = reps as f64;
    let fpr = per_rep.iter().map(|r| r.0).sum::<f64>() / rf;
    let var = if reps > 1 {
        per_rep.iter().map(|r| (r.0 - fpr).powi(2)).sum::<f64>() / (rf - 1.0)
    } else {
        0.0
    };
    Ok(FprRow {
        p,
        n,
        reps,
        min_seg,
        fpr,
        fpr_se: (var / rf).sqrt(),
        mean_detected: per_rep.iter().map(|r| r.1 as f64).sum::<f64>() / rf,
        recall: per_rep.iter().map(|r| r.2 as f64).sum::<f64>() / (rf * truth.len() as f64),
        true_changes: truth,
        published: FPR_ROWS.iter().find(|r| r.0 == p && r.1 == n).map(|r| (r.2, r.3)),
        // Replicates run sequentially; each segmentation scan is parallel inside.
    })
}

pub fn run_fpr_table(config: &ExperimentConfig) -> Result<FprResult> {
    config.validate()?;
    let rows: Vec<Dims> = if config.dims.is_empty() {
        FPR_ROWS.iter().map(|r| Dims { n: r.1, p: r.0 }).collect()
    } else {
        config.dims.clone()
    };
    let rows = rows
        .iter()
        .enumerate()
        .map(|(ci, d)| run_fpr_row(d.p, d.n, config.reps, config.alpha, config.seed, ci))
        .collect::<Result<_>>()?;
    Ok(FprResult {
        reps: config.reps,
        seed: config.seed,
        alpha: config.alpha,
        window: FPR_WINDOW,
        generator: FPR_GENERATOR.into(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlotKind {
    /// Marchenko–Pastur densities for γ ∈ {0.1, 0.25, 0.5, 1}.
    MpDensities { points: usize },
    /// Tracy–Widom density by centered differences of the CDF, step 1e-3.
    TwDensity { lo: f64, hi: f64, points: usize },
    /// Top sample eigenvalues per replicate under a spiked model.
    SpikeScatter { n: usize, p: usize, spikes: Vec<f64>, reps: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for (x, y) in &self.points {
            let _ = writeln!(out, "{x:.9e},{y:.9e}");
        }
        out
    }

    /// Trapezoid integral of the curve.
    pub fn trapezoid(&self) -> f64 {
        self.points.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[1].1 + w[0].1)).sum()
    }
}

pub fn plot_data_emit(kind: &PlotKind, tw: &TracyWidomTable) -> Result<Vec<Curve>> {
    match kind {
        PlotKind::MpDensities { points } => [0.1, 0.25, 0.5, 1.0]
            .iter()
            .map(|&g| {
                let law = MpLaw::standard(g)?;
                let (lo, hi) = ((1.0 - g.sqrt()).powi(2), (1.0 + g.sqrt()).powi(2));
                Ok(Curve { label: format!("mp_gamma_{g}"), points: density_curve(&law, lo, hi, *points) })
            })
            .collect(),
        PlotKind::TwDensity { lo, hi, points } => {
            if *points < 2 || !(hi > lo) {
                return Err(Error::Config("density grid needs points >= 2 and hi > lo".into()));
            }
            let h = 1e-3;
            let pts = (0..*points)
                .map(|i| {
                    let s = lo + (hi - lo) * i as f64 / (*points - 1) as f64;
                    (s, (tw.cdf(s + h) - tw.cdf(s - h)) / (2.0 * h))
                })
                .collect();
            Ok(vec![Curve { label: "tw1_density".into(), points: pts }])
        }
        PlotKind::SpikeScatter { n, p, spikes, reps, seed } => {
            let m = spikes.len().max(1).min(*p);
            let tops: Vec<Vec<f64>> = (0..*reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream_rng(*seed, r as u64);
                    Ok(sample_spiked_spectrum(&mut rng, spikes, 1.0, *n, *p)?.eigenvalues()[..m].to_vec())
                })
                .collect::<Result<_>>()?;
            Ok((0..m)
                .map(|j| Curve {
                    label: format!("lambda_{}", j + 1),
                    points: tops.iter().enumerate().map(|(r, t)| (r as f64, t[j])).collect(),
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub reps: usize,
    pub threads: usize,
    pub wall_time_secs: f64,
    pub generator: Option<String>,
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new<C: Serialize>(experiment: &str, seed: u64, reps: usize, config: &C, started: Instant) -> Self {
        Self {
            experiment: experiment.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            reps,
            threads: rayon::current_num_threads(),
            wall_time_secs: started.elapsed().as_secs_f64(),
            generator: None,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
        }
    }
}

/// Writes `<stem>.csv`, `<stem>.json` and `<stem>.manifest.json` into `dir`.
pub fn write_outputs<T: Serialize>(dir: &Path, stem: &str, csv: &str, result: &T, manifest: &Manifest) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files = [
        (dir.join(format!("{stem}.csv")), csv.to_string()),
        (
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(result).map_err(|e| Error::Parse(e.to_string()))?,
        ),
        (
            dir.join(format!("{stem}.manifest.json")),
            serde_json::to_string_pretty(manifest).map_err(|e| Error::Parse(e.to_string()))?,
        ),
    ];
    for (path, body) in &files {
        std::fs::write(path, body)?;
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::sample_covariance;

    fn tw() -> &'static TracyWidomTable {
        TracyWidomTable::global().unwrap()
    }

    #[test]
    fn ensembles_are_deterministic() {
        let spec = EnsembleSpec::WhiteWishart { n: 5, p: 5, noise: NoiseFamily::Gaussian };
        let a = generate_ensemble(&spec, &mut stream_rng(3, 0)).unwrap();
        let b = generate_ensemble(&spec, &mut stream_rng(3, 0)).unwrap();
        assert_eq!(a, b);
        let bad = EnsembleSpec::Spiked { n: 10, p: 2, spikes: vec![0.5], noise: NoiseFamily::Gaussian };
        assert!(matches!(generate_ensemble(&bad, &mut stream_rng(1, 0)), Err(Error::Config(_))));
        let bad = EnsembleSpec::ChangepointSeries { n: 10, p: 2, changepoints: vec![5, 3], noise: NoiseFamily::Gaussian };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn changepoint_series_has_documented_covariances() {
        let p = 4;
        let spec = EnsembleSpec::ChangepointSeries {
            n: 40_000,
            p,
            changepoints: vec![20_000],
            noise: NoiseFamily::Gaussian,
        };
        let Ensemble::Series { data, .. } = generate_ensemble(&spec, &mut stream_rng(8, 0)).unwrap() else {
            panic!("series expected")
        };
        let first = sample_covariance(&data.rows(0, 20_000).unwrap(), false).unwrap();
        let second = sample_covariance(&data.rows(20_000, 40_000).unwrap(), false).unwrap();
        assert!((first - DMatrix::identity(p, p)).amax() < 0.05);
        let ev = crate::spectral::eigenvalues_psd(&second).unwrap();
        let e = ev.eigenvalues();
        assert!((e[0] - 2.0).abs() < 0.1 && (e[1] - 2.0).abs() < 0.1);
        assert!((e[2] - 1.0).abs() < 0.05 && (e[3] - 1.0).abs() < 0.05);
    }

    #[test]
    fn haar_rotation_is_orthogonal() {
        let q = haar_orthogonal(&mut stream_rng(2, 0), 7);
        assert!((q.transpose() * &q - DMatrix::identity(7, 7)).amax() < 1e-12);
    }

    #[test]
    fn table1_small_run_is_reproducible() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Table1, 200, 42);
        cfg.dims = vec![Dims { n: 10, p: 10 }];
        let a = run_table1(&cfg, tw()).unwrap();
        let b = run_table1(&cfg, tw()).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.cases[0].published.is_some());
        assert!(a.cases[0].empirical.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn spiked_generator_has_planted_variances() {
        let spec = EnsembleSpec::Spiked { n: 50_000, p: 3, spikes: vec![5.0], noise: NoiseFamily::Laplace };
        let e = generate_ensemble(&spec, &mut stream_rng(4, 0)).unwrap();
        let s = sample_covariance(e.primary(), false).unwrap();
        assert!((s[(0, 0)] - 5.0).abs() < 0.15 && (s[(1, 1)] - 1.0).abs() < 0.05);
    }

    #[test]
    fn plot_curves() {
        let curves = plot_data_emit(&PlotKind::MpDensities { points: 4001 }, tw()).unwrap();
        assert_eq!(curves.len(), 4);
        let g25 = curves.iter().find(|c| c.label == "mp_gamma_0.25").unwrap();
        assert!((g25.trapezoid() - 1.0).abs() < 1e-3);
        let d = plot_data_emit(&PlotKind::TwDensity { lo: -5.0, hi: 3.0, points: 801 }, tw()).unwrap();
        let mode = d[0].points.iter().cloned().fold((0.0, 0.0), |m, p| if p.1 > m.1 { p } else { m });
        assert!(mode.0 < -1.1 && mode.0 > -1.5, "mode at {}", mode.0);
        assert!((d[0].trapezoid() - 1.0).abs() < 2e-3);
    }

    #[test]
    fn fpr_helpers() {
        assert_eq!(fpr_changepoints(1000), vec![250, 500, 750]);
        assert_eq!(fpr_min_seg(100), 500);
        assert_eq!(fpr_min_seg(3), 30);
    }
}

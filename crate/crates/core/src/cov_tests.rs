//! Covariance hypothesis tests: log-eigenvalue CLT tests (one-sample,
//! regression, two-sample), Tracy–Widom largest-root tests (sphericity,
//! two-sample F-type, Wald-type regression) and the two-sample power function.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::spectral::{
    cholesky_factor, eigenvalues_psd, generalized_eigenvalues, sample_covariance,
    scatter_matrix, symmetrize, DataMatrix, Spectrum,
};
use crate::tracy_widom::{jacobi_centering, JacobiCentering, TracyWidomTable};

/// Null reference distribution of a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    StandardNormal,
    TracyWidom,
}

/// Outcome of a test together with every constant used to reach it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    /// Test statistic on its natural scale (|z| for two-sided normal tests).
    pub statistic: f64,
    /// Signed statistic on the reference scale.
    pub normalized: f64,
    pub reference: Reference,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub constants: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl TestReport {
    fn normal_two_sided(test: &str, z: f64, alpha: f64, constants: BTreeMap<String, f64>) -> Self {
        let p_value = (2.0 * normal::sf(z.abs())).min(1.0);
        Self {
            test: test.into(),
            statistic: z.abs(),
            normalized: z,
            reference: Reference::StandardNormal,
            p_value,
            reject: p_value < alpha,
            alpha,
            constants,
            notes: Vec::new(),
        }
    }

    fn tracy_widom(
        test: &str,
        raw: f64,
        s: f64,
        alpha: f64,
        tw: &TracyWidomTable,
        mut constants: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let critical = tw.quantile(1.0 - alpha)?;
        constants.insert("critical_value".into(), critical);
        let p_value = 1.0 - tw.cdf(s);
        Ok(Self {
            test: test.into(),
            statistic: raw,
            normalized: s,
            reference: Reference::TracyWidom,
            p_value,
            reject: p_value < alpha,
            alpha,
            constants,
            notes: Vec::new(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Pieces of a log-eigenvalue CLT statistic:
/// `value = scale · (log_ratio_sum − log_df_sum)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogCltStatistic {
    pub value: f64,
    pub p: usize,
    pub df: usize,
    pub scale: f64,
    pub log_ratio_sum: f64,
    pub log_df_sum: f64,
}

impl LogCltStatistic {
    fn new(p: usize, df: usize, scale: f64, log_ratio_sum: f64, log_df_sum: f64) -> Self {
        Self {
            value: scale * (log_ratio_sum - log_df_sum),
            p,
            df,
            scale,
            log_ratio_sum,
            log_df_sum,
        }
    }

    fn insert_into(&self, c: &mut BTreeMap<String, f64>) {
        c.insert("p".into(), self.p as f64);
        c.insert("df".into(), self.df as f64);
        c.insert("scale".into(), self.scale);
        c.insert("log_ratio_sum".into(), self.log_ratio_sum);
        c.insert("log_df_sum".into(), self.log_df_sum);
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn positive_log_sum(s: &Spectrum, what: &str) -> Result<f64> {
    if let Some(v) = s.eigenvalues().iter().find(|&&v| v <= 0.0) {
        return Err(Error::Rank(format!("{what} has a non-positive eigenvalue {v:e}")));
    }
    Ok(s.eigenvalues().iter().map(|v| v.ln()).sum())
}

fn reference_log_sum(sigma0: &Spectrum, p: usize) -> Result<f64> {
    if sigma0.dim() != p {
        return Err(Error::Input(format!(
            "reference spectrum has {} eigenvalues, data dimension is {p}",
            sigma0.dim()
        )));
    }
    if let Some(v) = sigma0.eigenvalues().iter().find(|&&v| v <= 0.0) {
        return Err(Error::Input(format!("reference eigenvalue {v:e} is not positive")));
    }
    Ok(sigma0.eigenvalues().iter().map(|v| v.ln()).sum())
}

/// One-sample log-CLT statistic from the spectrum of the centered scatter
/// matrix `Σ(x_i − x̄)(x_i − x̄)ᵀ` of `n` observations.
pub fn one_sample_logclt_statistic(
    scatter: &Spectrum,
    n: usize,
    sigma0: &Spectrum,
) -> Result<LogCltStatistic> {
    let p = scatter.dim();
    if n <= p {
        return Err(Error::Rank(format!(
            "one-sample test needs n > p (n = {n}, p = {p})"
        )));
    }
    let ratio = positive_log_sum(scatter, "scatter matrix")? - reference_log_sum(sigma0, p)?;
    let offset: f64 = (1..=p).map(|i| ((n - p + i) as f64).ln()).sum();
    let scale = ((n - 1) as f64 / (2.0 * p as f64)).sqrt();
    Ok(LogCltStatistic::new(p, n - 1, scale, ratio, offset))
}

/// Two-sided test of `Σ = Σ₀` from the log-determinant CLT.
pub fn one_sample_logclt_test(
    data: &DataMatrix,
    sigma0: &Spectrum,
    alpha: f64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return Err(Error::Rank(format!(
            "sample covariance is singular for n = {n} <= p = {p}"
        )));
    }
    let scatter = eigenvalues_psd(&scatter_matrix(data, true))?;
    one_sample_logclt_from_scatter(&scatter, n, sigma0, alpha)
}

/// [`one_sample_logclt_test`] from a precomputed scatter spectrum.
pub fn one_sample_logclt_from_scatter(
    scatter: &Spectrum,
    n: usize,
    sigma0: &Spectrum,
    alpha: f64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let stat = one_sample_logclt_statistic(scatter, n, sigma0)?;
    let mut c = BTreeMap::new();
    stat.insert_into(&mut c);
    c.insert("n".into(), n as f64);
    c.insert("z_half_alpha".into(), normal::upper_quantile(alpha / 2.0));
    let mut r = TestReport::normal_two_sided("one-sample-logclt", stat.value, alpha, c);
    r.notes.push("eigenvalues are those of the centered scatter matrix (n-1)S".into());
    Ok(r)
}

fn column_rank_and_basis(x: &DMatrix<f64>) -> (usize, DMatrix<f64>) {
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let q = qr.q();
    let diag_max = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = diag_max * f64::EPSILON * x.nrows().max(x.ncols()) as f64;
    let rank = r.diagonal().iter().filter(|v| v.abs() > tol).count();
    (rank, q.columns(0, rank).into_owned())
}

/// Residual sum-of-squares matrix `Yᵀ(I − P_X)Y` and the rank of `X`.
pub fn residual_sscp(y: &DataMatrix, x: &DataMatrix) -> Result<(DMatrix<f64>, usize)> {
    if y.n() != x.n() {
        return Err(Error::Input(format!(
            "response has {} rows, design has {}",
            y.n(),
            x.n()
        )));
    }
    let (rank, q) = column_rank_and_basis(x.values());
    let yv = y.values();
    let resid = yv - &q * (q.transpose() * yv);
    let mut sse = resid.tr_mul(&resid);
    symmetrize(&mut sse);
    Ok((sse, rank))
}

/// Two-sided test of `Σ = Σ₀` for the error covariance of `Y = XB + E`.
///
/// The offset is `Σ_{i=1}^m log(n − r − k + i)`. `k` defaults to the response
/// dimension `m`, which matches the expected log-determinant of a Wishart matrix
/// with `n − r` degrees of freedom.
pub fn regression_cov_test(
    y: &DataMatrix,
    x: &DataMatrix,
    sigma0: &Spectrum,
    alpha: f64,
    k: Option<usize>,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let (n, m) = (y.n(), y.p());
    let (sse, r) = residual_sscp(y, x)?;
    if n <= r + m {
        return Err(Error::Precondition(format!(
            "regression test needs n > r + m (n = {n}, r = {r}, m = {m})"
        )));
    }
    let k_used = k.unwrap_or(m);
    if n - r + 1 <= k_used {
        return Err(Error::Precondition(format!(
            "offset log(n - r - k + 1) undefined for n = {n}, r = {r}, k = {k_used}"
        )));
    }
    let spec = eigenvalues_psd(&sse)?;
    let ratio = positive_log_sum(&spec, "SSE matrix")? - reference_log_sum(sigma0, m)?;
    let offset: f64 = (1..=m).map(|i| ((n - r - k_used + i) as f64).ln()).sum();
    let scale = ((n - r) as f64 / (2.0 * m as f64)).sqrt();
    let stat = LogCltStatistic::new(m, n - r, scale, ratio, offset);
    let mut c = BTreeMap::new();
    stat.insert_into(&mut c);
    c.insert("n".into(), n as f64);
    c.insert("rank_x".into(), r as f64);
    c.insert("k".into(), k_used as f64);
    c.insert("z_half_alpha".into(), normal::upper_quantile(alpha / 2.0));
    let mut rep = TestReport::normal_two_sided("regression-logclt", stat.value, alpha, c);
    if k.is_none() {
        rep.notes.push(format!("k not supplied; defaulted to the response dimension m = {m}"));
    }
    Ok(rep)
}

/// Centering of `Σ log(λ̂_i/λ̂*_i)` for sample covariances with divisors
/// `m − 1` and `n − 1` under equal population covariances.
pub fn two_sample_log_centering(p: usize, m: usize, n: usize) -> f64 {
    (1..=p)
        .map(|i| {
            let a = ((m - 1 - p + i) as f64 / (m - 1) as f64).ln();
            let b = ((n - 1 - p + i) as f64 / (n - 1) as f64).ln();
            a - b
        })
        .sum()
}

fn two_sample_scale(p: usize, m: usize, n: usize) -> f64 {
    let c = n as f64 / m as f64;
    (m as f64 / (2.0 * p as f64 * (1.0 + 1.0 / c))).sqrt()
}

/// Two-sided test of `Σ₁ = Σ₂` from the log-determinant CLT. `data_x` has
/// `m` rows, `data_y` has `n` rows.
pub fn two_sample_logclt_test(
    data_x: &DataMatrix,
    data_y: &DataMatrix,
    alpha: f64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let (m, n, p) = (data_x.n(), data_y.n(), data_x.p());
    if data_y.p() != p {
        return Err(Error::Input(format!("dimensions differ: {p} vs {}", data_y.p())));
    }
    if m <= p + 1 || n <= p + 1 {
        return Err(Error::Rank(format!(
            "two-sample test needs m, n > p + 1 (m = {m}, n = {n}, p = {p})"
        )));
    }
    let sx = eigenvalues_psd(&sample_covariance(data_x, true)?)?;
    let sy = eigenvalues_psd(&sample_covariance(data_y, true)?)?;
    let ratio = positive_log_sum(&sx, "first sample covariance")?
        - positive_log_sum(&sy, "second sample covariance")?;
    let centering = two_sample_log_centering(p, m, n);
    let printed: f64 = (1..=p)
        .map(|i| ((n - p + i) as f64 / (m - p + i) as f64).ln())
        .sum();
    let scale = two_sample_scale(p, m, n);
    let stat = LogCltStatistic::new(p, m, scale, ratio, centering);
    let mut c = BTreeMap::new();
    stat.insert_into(&mut c);
    c.insert("m".into(), m as f64);
    c.insert("n".into(), n as f64);
    c.insert("c".into(), n as f64 / m as f64);
    c.insert("centering_size_ratio_form".into(), printed);
    c.insert("z_half_alpha".into(), normal::upper_quantile(alpha / 2.0));
    let mut rep = TestReport::normal_two_sided("two-sample-logclt", stat.value, alpha, c);
    if m != n {
        rep.notes.push(
            "centering uses the exact expected log-ratio for divisors m-1 and n-1".into(),
        );
    }
    Ok(rep)
}

/// Power of the two-sample log-CLT test at one alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub alternative: String,
    pub power: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub points: Vec<PowerPoint>,
}

/// `β = 1 − Φ(z_{α/2} − δ) + Φ(−z_{α/2} − δ)` with
/// `δ = √(m/(2p(1+1/c))) Σ log(λ_i/λ*_i)`.
pub fn two_sample_power_value(
    p: usize,
    m: usize,
    n: usize,
    eig1: &Spectrum,
    eig2: &Spectrum,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    if eig1.dim() != p || eig2.dim() != p {
        return Err(Error::Input(format!(
            "power needs {p} eigenvalues per population, got {} and {}",
            eig1.dim(),
            eig2.dim()
        )));
    }
    if m == 0 || n == 0 {
        return Err(Error::Input("sample sizes must be positive".into()));
    }
    let drift = two_sample_scale(p, m, n)
        * (reference_log_sum(eig1, p)? - reference_log_sum(eig2, p)?);
    let z = normal::upper_quantile(alpha / 2.0);
    Ok((normal::sf(z - drift) + normal::cdf(-z - drift)).clamp(0.0, 1.0))
}

pub fn two_sample_power(
    p: usize,
    m: usize,
    n: usize,
    eig1: &Spectrum,
    eig2: &Spectrum,
    alpha: f64,
) -> Result<PowerCurve> {
    let power = two_sample_power_value(p, m, n, eig1, eig2, alpha)?;
    Ok(PowerCurve {
        points: vec![PowerPoint {
            alternative: format!("p={p}, m={m}, n={n}"),
            power,
        }],
    })
}

/// `T_p = λ_max(S)/(tr S/p)` with `S = XᵀX/n` (no centering).
pub fn glrt_sphericity_statistic(data: &DataMatrix) -> Result<f64> {
    let s = sample_covariance(data, false)?;
    let spec = eigenvalues_psd(&s)?;
    let mean = spec.mean();
    if !(mean > 0.0) {
        return Err(Error::Degenerate("zero data matrix has no sphericity statistic".into()));
    }
    Ok(spec.largest() / mean)
}

/// How the Tracy–Widom scale of `T_p` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlrtScaling {
    /// `(T − (1+√c)²)(1+√c)^{−4/3} c^{1/6} n^{2/3}`.
    #[default]
    Threshold,
    /// `(T − (1+√c)²) / ((1+√c)(4/3)c^{−1/6}n^{−2/3})`, kept for comparison.
    Literal,
}

pub fn glrt_sphericity_test(
    data: &DataMatrix,
    alpha: f64,
    tw: &TracyWidomTable,
) -> Result<TestReport> {
    glrt_sphericity_test_with(data, alpha, tw, GlrtScaling::Threshold)
}

pub fn glrt_sphericity_test_with(
    data: &DataMatrix,
    alpha: f64,
    tw: &TracyWidomTable,
    scaling: GlrtScaling,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let t = glrt_sphericity_statistic(data)?;
    let (n, p) = (data.n() as f64, data.p() as f64);
    let c = p / n;
    let rc = 1.0 + c.sqrt();
    let center = rc * rc;
    let s = match scaling {
        GlrtScaling::Threshold => (t - center) * rc.powf(-4.0 / 3.0) * c.powf(1.0 / 6.0) * n.powf(2.0 / 3.0),
        GlrtScaling::Literal => (t - center) / (rc * (4.0 / 3.0) * c.powf(-1.0 / 6.0) * n.powf(-2.0 / 3.0)),
    };
    let mut k = BTreeMap::new();
    k.insert("n".into(), n);
    k.insert("p".into(), p);
    k.insert("c".into(), c);
    k.insert("center".into(), center);
    let mut r = TestReport::tracy_widom("glrt-sphericity", t, s, alpha, tw, k)?;
    if scaling == GlrtScaling::Literal {
        r.notes.push("literal (1+sqrt c)(4/3)c^(-1/6)n^(-2/3) scaling".into());
    }
    Ok(r)
}

fn insert_jacobi(c: &mut BTreeMap<String, f64>, j: &JacobiCentering) {
    c.insert("m_breve".into(), j.m_breve as f64);
    c.insert("n_breve".into(), j.n_breve as f64);
    c.insert("p_breve".into(), j.p_breve as f64);
    c.insert("gamma_angle".into(), j.gamma_angle);
    c.insert("psi_angle".into(), j.psi_angle);
    c.insert("mu_j".into(), j.mu_j);
    c.insert("sigma_j".into(), j.sigma_j);
}

/// Largest-root test of `Σ₁ = Σ₂`: `θ = λ_max(W_Y⁻¹W_X)` with centered scatter
/// matrices `W_X` (`m − 1` df) and `W_Y` (`n − 1` df), normalized by the Jacobi
/// constants in which `W_Y` plays the inverted role.
pub fn two_sample_largest_root_test(
    data_x: &DataMatrix,
    data_y: &DataMatrix,
    alpha: f64,
    tw: &TracyWidomTable,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let (m, n, p) = (data_x.n(), data_y.n(), data_x.p());
    if data_y.p() != p {
        return Err(Error::Input(format!("dimensions differ: {p} vs {}", data_y.p())));
    }
    if n < 2 || n - 1 <= p {
        return Err(Error::Rank(format!(
            "second-sample scatter is singular (n - 1 = {} <= p = {p})",
            n.saturating_sub(1)
        )));
    }
    if m < 2 {
        return Err(Error::Precondition("first sample needs at least two rows".into()));
    }
    let wx = scatter_matrix(data_x, true);
    let wy = scatter_matrix(data_y, true);
    let theta = generalized_eigenvalues(&wx, &wy)?.largest();
    let j = jacobi_centering(n - 1, m - 1, p)?;
    let s = j.normalize_ratio(theta);
    let mut c = BTreeMap::new();
    insert_jacobi(&mut c, &j);
    c.insert("theta".into(), theta);
    c.insert("m".into(), m as f64);
    c.insert("n".into(), n as f64);
    c.insert(
        "normalized_size_ratio_form".into(),
        j.normalize_ratio(j.n_breve as f64 / j.m_breve as f64 * theta),
    );
    TestReport::tracy_widom("f-largest-root", theta, s, alpha, tw, c)
}

/// Wald-type largest-root test of `H₀: LᵀB = B₀` in `Y = XB + E`.
///
/// The hypothesis matrix `A = (LᵀB̂ − B₀)ᵀ(Lᵀ(XᵀX)⁻¹L)⁻¹(LᵀB̂ − B₀)` has rank at
/// most `k`, so the root is taken as `θ = λ_max(B⁻¹A)` with `B = Yᵀ(I − P_X)Y`
/// (the error matrix is the inverted one).
pub fn wald_largest_root_test(
    y: &DataMatrix,
    x: &DataMatrix,
    l: &DMatrix<f64>,
    b0: &DMatrix<f64>,
    alpha: f64,
    tw: &TracyWidomTable,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let (n, m, p) = (y.n(), y.p(), x.p());
    if x.n() != n {
        return Err(Error::Input(format!("Y has {n} rows, X has {}", x.n())));
    }
    if l.nrows() != p {
        return Err(Error::Input(format!("L must have {p} rows, has {}", l.nrows())));
    }
    let k = l.ncols();
    if b0.nrows() != k || b0.ncols() != m {
        return Err(Error::Input(format!(
            "B0 must be {k}x{m}, is {}x{}",
            b0.nrows(),
            b0.ncols()
        )));
    }
    if n <= p + m {
        return Err(Error::Precondition(format!(
            "Wald test needs n - p > m (n = {n}, p = {p}, m = {m})"
        )));
    }
    let (rank_x, _) = column_rank_and_basis(x.values());
    if rank_x < p {
        return Err(Error::Rank(format!("X has rank {rank_x} < {p}")));
    }
    let (rank_l, _) = column_rank_and_basis(l);
    if rank_l < k {
        return Err(Error::Rank(format!("L has rank {rank_l} < {k}")));
    }
    let xv = x.values();
    let yv = y.values();
    let xtx = xv.tr_mul(xv);
    let chol = nalgebra::Cholesky::new(xtx.clone())
        .ok_or_else(|| Error::Rank("XᵀX is not positive definite".into()))?;
    let b_hat = chol.solve(&xv.tr_mul(yv));
    let d = l.transpose() * &b_hat - b0;
    let g_l = chol.solve(l);
    let mut mid = l.transpose() * g_l;
    symmetrize(&mut mid);
    let mid_chol = nalgebra::Cholesky::new(mid)
        .ok_or_else(|| Error::Rank("Lᵀ(XᵀX)⁻¹L is singular".into()))?;
    let mut a = d.transpose() * mid_chol.solve(&d);
    symmetrize(&mut a);
    let (b, _) = residual_sscp(y, x)?;
    let yty_norm = yv.tr_mul(yv).norm();
    if a.norm() <= 1e-12 * yty_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(
            "hypothesis matrix is zero: the largest root of det(λA - B) is undefined".into(),
        ));
    }
    cholesky_factor(&b)?;
    let theta = generalized_eigenvalues(&a, &b)?.largest();
    let j = jacobi_centering(n - p, k, m)?;
    let s = j.normalize_ratio(theta);
    let mut c = BTreeMap::new();
    insert_jacobi(&mut c, &j);
    c.insert("theta".into(), theta);
    c.insert("k".into(), k as f64);
    c.insert("error_df".into(), (n - p) as f64);
    let mut rep = TestReport::tracy_widom("wald-largest-root", theta, s, alpha, tw, c)?;
    rep.notes.push(
        "root orientation: largest eigenvalue of B^-1 A (error matrix inverted), since A has rank <= k"
            .into(),
    );
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{gaussian_matrix, stream_rng};
    use proptest::prelude::*;

    fn tw() -> &'static TracyWidomTable {
        TracyWidomTable::global().unwrap()
    }

    fn white(seed: u64, n: usize, p: usize) -> DataMatrix {
        DataMatrix::new(gaussian_matrix(&mut stream_rng(seed, 0), n, p)).unwrap()
    }

    #[test]
    fn centering_annihilates_constructed_spectrum() {
        let (n, p) = (200, 4);
        let sigma0 = Spectrum::new(vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        // λ̂_i = λ_i (n − p + i), paired in any order since only sums enter.
        let hat: Vec<f64> = (1..=p).map(|i| sigma0.eigenvalues()[i - 1] * (n - p + i) as f64).collect();
        let r = one_sample_logclt_from_scatter(&Spectrum::new(hat).unwrap(), n, &sigma0, 0.05).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!(!r.reject);
    }

    #[test]
    fn one_sample_rejects_doubled_covariance() {
        let d = white(3, 2000, 10).scaled(2f64.sqrt()).unwrap();
        let r = one_sample_logclt_test(&d, &Spectrum::new(vec![1.0; 10]).unwrap(), 0.05).unwrap();
        assert!(r.reject && r.statistic > 10.0);
        assert!(matches!(
            one_sample_logclt_test(&white(1, 5, 10), &Spectrum::new(vec![1.0; 10]).unwrap(), 0.05),
            Err(Error::Rank(_))
        ));
        let bad = Spectrum::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            one_sample_logclt_test(&white(1, 50, 2), &bad, 0.05),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn two_sample_identical_data_never_rejects() {
        let d = white(9, 300, 5);
        let r = two_sample_logclt_test(&d, &d, 0.05).unwrap();
        assert!(r.statistic.abs() < 1e-10);
        assert!(!r.reject);
    }

    #[test]
    fn power_equals_alpha_without_drift() {
        let e = Spectrum::new(vec![1.0, 2.0, 3.0]).unwrap();
        let b = two_sample_power_value(3, 500, 700, &e, &e, 0.05).unwrap();
        assert!((b - 0.05).abs() < 1e-9);
        let e2 = e.scaled(2.0).unwrap();
        let mut prev = 1.0;
        for &a in &[0.2, 0.1, 0.05, 0.01, 0.001] {
            let b = two_sample_power_value(3, 50, 50, &e2, &e, a).unwrap();
            assert!(b <= prev + 1e-15);
            prev = b;
        }
    }

    #[test]
    fn sphericity_statistic_properties() {
        let d = DataMatrix::new(DMatrix::identity(4, 4)).unwrap();
        assert!((glrt_sphericity_statistic(&d).unwrap() - 1.0).abs() < 1e-12);
        let w = white(4, 80, 6);
        let t1 = glrt_sphericity_statistic(&w).unwrap();
        let t3 = glrt_sphericity_statistic(&w.scaled(3.0).unwrap()).unwrap();
        assert!((t1 - t3).abs() < 1e-12 * t1);
        let z = DataMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(glrt_sphericity_statistic(&z), Err(Error::Degenerate(_))));
    }

    #[test]
    fn sphericity_statistic_near_edge() {
        let t = glrt_sphericity_statistic(&white(8, 800, 200)).unwrap();
        assert!((t - 2.25).abs() < 0.1, "T = {t}");
    }

    #[test]
    fn largest_root_of_identical_samples_is_one() {
        let d = white(12, 120, 20);
        let r = two_sample_largest_root_test(&d, &d, 0.05, tw()).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-10);
        assert!(!r.reject && r.normalized < -5.0);
    }

    #[test]
    fn wald_flags_zero_hypothesis_matrix() {
        let mut rng = stream_rng(2, 0);
        let (n, p, m) = (60, 3, 4);
        let x = gaussian_matrix(&mut rng, n, p);
        let b = gaussian_matrix(&mut rng, p, m);
        let y = &x * &b;
        let l = DMatrix::identity(p, 2);
        let b0 = l.transpose() * &b;
        let r = wald_largest_root_test(
            &DataMatrix::new(y).unwrap(),
            &DataMatrix::new(x).unwrap(),
            &l,
            &b0,
            0.05,
            tw(),
        );
        assert!(matches!(r, Err(Error::Degenerate(_))), "{r:?}");
    }

    #[test]
    fn regression_residuals_are_orthogonal_to_design() {
        let mut rng = stream_rng(21, 0);
        let x = gaussian_matrix(&mut rng, 40, 3);
        let y = gaussian_matrix(&mut rng, 40, 2);
        let (sse, r) = residual_sscp(
            &DataMatrix::new(y.clone()).unwrap(),
            &DataMatrix::new(x.clone()).unwrap(),
        )
        .unwrap();
        assert_eq!(r, 3);
        // Oracle: normal equations.
        let beta = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
        let e = &y - &x * beta;
        assert!((e.transpose() * &e - sse).norm() < 1e-9);
    }

    #[test]
    fn report_serializes_constants() {
        let r = two_sample_logclt_test(&white(1, 50, 3), &white(2, 60, 3), 0.05).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["reference"], "standard-normal");
        assert!(v["constants"]["scale"].is_number());
        assert!(!r.constants.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn reject_is_monotone_in_alpha(seed in 0u64..1000, a in 0.001f64..0.5, b in 0.001f64..0.5) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let d = white(seed, 60, 4).scaled(1.3).unwrap();
            let s0 = Spectrum::new(vec![1.0; 4]).unwrap();
            let r_lo = one_sample_logclt_test(&d, &s0, lo).unwrap();
            let r_hi = one_sample_logclt_test(&d, &s0, hi).unwrap();
            prop_assert!(!r_lo.reject || r_hi.reject);
            let g_lo = glrt_sphericity_test(&d, lo, tw()).unwrap();
            let g_hi = glrt_sphericity_test(&d, hi, tw()).unwrap();
            prop_assert!(!g_lo.reject || g_hi.reject);
        }

        #[test]
        fn two_sample_decision_invariant_under_swap(seed in 0u64..1000) {
            let x = white(seed, 80, 5);
            let y = white(seed + 5000, 80, 5).scaled(1.2).unwrap();
            let a = two_sample_logclt_test(&x, &y, 0.05).unwrap();
            let b = two_sample_logclt_test(&y, &x, 0.05).unwrap();
            prop_assert_eq!(a.reject, b.reject);
            prop_assert!((a.normalized + b.normalized).abs() < 1e-9);
        }
    }
}

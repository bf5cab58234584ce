//! Dense symmetric-matrix utilities: sample covariances, eigenvalues, and
//! empirical spectral distributions.
//!
//! Data matrices are stored with one observation per row (`n × p`). Covariance
//! matrices are `p × p`; this is the single place where the observation axis
//! is contracted away.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::linalg::SymmetricTridiagonal;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::laws::LimitLaw;
use serde::{Deserialize, Serialize};

/// Clipping threshold for slightly negative eigenvalues of PSD sources.
pub const PSD_CLIP_REL: f64 = 1e-12;
/// Negative eigenvalues below `-PSD_REJECT_REL * max|λ|` mean the source was not PSD.
pub const PSD_REJECT_REL: f64 = 1e-8;
/// Relative asymmetry tolerated by [`eigenvalues_sym`].
pub const SYMMETRY_TOL: f64 = 1e-10;

const QL_MAX_SWEEPS: usize = 60;

/// `n × p` observation matrix (rows are observations).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Input(format!(
                "data matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::Input(format!("non-finite entry at row {r}, column {c}")));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::Input(format!(
                "row {i} has {} columns, expected {p}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Dimension.
    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    /// Rows `start..end` as a new data matrix.
    pub fn rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n() {
            return Err(Error::Input(format!(
                "row range {start}..{end} invalid for n = {}",
                self.n()
            )));
        }
        Ok(Self {
            values: self.values.rows(start, end - start).into_owned(),
        })
    }

    /// Every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.values * c)
    }

    /// Reads comma-separated numbers, one observation per line. A first line
    /// that does not parse as numbers is treated as a header.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn from_csv_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                trimmed.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(_) if rows.is_empty() && lineno == 0 => continue,
                Err(e) => {
                    return Err(Error::Parse(format!("line {}: {e}", lineno + 1)));
                }
            }
        }
        Self::from_rows(&rows)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.p())
                .map(|j| format!("{:e}", self.values[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Eigenvalues of a symmetric matrix, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    source_df: Option<usize>,
}

impl Spectrum {
    /// Sorts `values` descending (stable with respect to input order).
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("empty spectrum".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite eigenvalue".into()));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            eigenvalues: values,
            source_df: None,
        })
    }

    /// Spectrum of a positive semi-definite source: tiny negative values are
    /// clipped to zero, clearly negative values are rejected.
    pub fn from_psd(values: Vec<f64>) -> Result<Self> {
        let mut s = Self::new(values)?;
        let scale = s.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in s.eigenvalues.iter_mut() {
            if *v < -PSD_REJECT_REL * scale {
                return Err(Error::Input(format!(
                    "eigenvalue {v:e} is negative for a PSD source (scale {scale:e})"
                )));
            }
            if *v < 0.0 && *v >= -PSD_CLIP_REL * scale {
                *v = 0.0;
            }
        }
        Ok(s)
    }

    pub fn with_source_df(mut self, df: usize) -> Self {
        self.source_df = Some(df);
        self
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn source_df(&self) -> Option<usize> {
        self.source_df
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn smallest(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.dim() as f64
    }

    /// Every eigenvalue multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Parameter(format!("scale must be positive, got {c}")));
        }
        Ok(Self {
            eigenvalues: self.eigenvalues.iter().map(|v| v * c).collect(),
            source_df: self.source_df,
        })
    }

    pub fn esd(&self) -> Esd {
        Esd::new(self)
    }

    /// Single-column CSV, descending.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eigenvalue")?;
        for v in &self.eigenvalues {
            writeln!(w, "{v:.17e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            match t.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) if lineno == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("line {}: {e}", lineno + 1))),
            }
        }
        Self::new(values)
    }
}

/// Empirical spectral distribution: mass `1/p` on every eigenvalue.
#[derive(Debug, Clone)]
pub struct Esd {
    ascending: Vec<f64>,
}

impl Esd {
    pub fn new(spectrum: &Spectrum) -> Self {
        let mut ascending = spectrum.eigenvalues().to_vec();
        ascending.reverse();
        Self { ascending }
    }

    pub fn dim(&self) -> usize {
        self.ascending.len()
    }

    /// `F̂(x) = #{λ ≤ x} / p` (right-continuous).
    pub fn cdf(&self, x: f64) -> f64 {
        self.ascending.partition_point(|&v| v <= x) as f64 / self.dim() as f64
    }

    /// `F̂(x−) = #{λ < x} / p`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.ascending.partition_point(|&v| v < x) as f64 / self.dim() as f64
    }

    /// Distinct jump locations, ascending.
    pub fn jump_points(&self) -> Vec<f64> {
        let mut pts = self.ascending.clone();
        pts.dedup();
        pts
    }
}

/// Scatter matrix `Σ (x_i − x̄)(x_i − x̄)ᵀ` (or `Σ x_i x_iᵀ` without centering), symmetrized.
pub fn scatter_matrix(data: &DataMatrix, center: bool) -> DMatrix<f64> {
    let x = data.values();
    let mut s = if center {
        let means = x.row_mean();
        let mut c = x.clone();
        for mut row in c.row_iter_mut() {
            row -= &means;
        }
        c.tr_mul(&c)
    } else {
        x.tr_mul(x)
    };
    symmetrize(&mut s);
    s
}

/// Sample covariance: divisor `n − 1` with centering, `n` without.
pub fn sample_covariance(data: &DataMatrix, center: bool) -> Result<DMatrix<f64>> {
    let n = data.n();
    let divisor = if center { n.saturating_sub(1) } else { n };
    if divisor == 0 {
        return Err(Error::Precondition(format!(
            "centered covariance needs n >= 2, got n = {n}"
        )));
    }
    sample_covariance_with_divisor(data, center, divisor as f64)
}

/// Scatter matrix divided by an explicit `divisor`.
pub fn sample_covariance_with_divisor(
    data: &DataMatrix,
    center: bool,
    divisor: f64,
) -> Result<DMatrix<f64>> {
    if center && data.n() < 2 {
        return Err(Error::Precondition(format!(
            "centered covariance needs n >= 2, got n = {}",
            data.n()
        )));
    }
    if !(divisor > 0.0) {
        return Err(Error::Precondition(format!("divisor must be positive, got {divisor}")));
    }
    Ok(scatter_matrix(data, center) / divisor)
}

/// Replaces `m` by `(m + mᵀ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Input(format!(
            "matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::Input("empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("matrix has non-finite entries".into()));
    }
    let scale = m.amax();
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (m[(i, j)] - m[(j, i)]).abs();
            if d > SYMMETRY_TOL * scale {
                return Err(Error::Input(format!(
                    "matrix is not symmetric: |m[{i},{j}] - m[{j},{i}]| = {d:e}"
                )));
            }
        }
    }
    Ok(())
}

/// Eigenvalues of a real symmetric tridiagonal matrix by implicit QL with
/// Wilkinson-style shifts. `off[i]` couples rows `i` and `i + 1`.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if off.len() + 1 != n {
        return Err(Error::Input(format!(
            "tridiagonal: {} diagonal vs {} off-diagonal entries",
            n,
            off.len()
        )));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_SWEEPS {
                return Err(Error::numerical(
                    format!("tridiagonal QL did not converge for eigenvalue {l}"),
                    iter,
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

fn raw_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let mut sym = m.clone();
    symmetrize(&mut sym);
    if sym.nrows() == 1 {
        return Ok(vec![sym[(0, 0)]]);
    }
    let (diag, off) = SymmetricTridiagonal::new(sym).unpack_tridiagonal();
    tridiagonal_eigenvalues(diag.as_slice(), off.as_slice())
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn eigenvalues_sym(m: &DMatrix<f64>) -> Result<Spectrum> {
    Spectrum::new(raw_eigenvalues(m)?)
}

/// Eigenvalues of a symmetric positive semi-definite matrix (clipped, see [`Spectrum::from_psd`]).
pub fn eigenvalues_psd(m: &DMatrix<f64>) -> Result<Spectrum> {
    Spectrum::from_psd(raw_eigenvalues(m)?)
}

/// Eigenvalues and orthonormal eigenvectors (columns), sorted descending.
pub fn eigen_decomposition(m: &DMatrix<f64>) -> Result<(Spectrum, DMatrix<f64>)> {
    const MAX_ITER: usize = 100_000;
    check_symmetric(m)?;
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let n = sym.nrows();
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::numerical("symmetric eigensolver did not converge", MAX_ITER))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((Spectrum::new(values)?, vectors))
}

/// Eigenvalues of `B⁻¹A` for symmetric `A` and symmetric positive definite `B`,
/// computed as the spectrum of `L⁻¹AL⁻ᵀ` with `B = LLᵀ`.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Spectrum> {
    check_symmetric(a)?;
    check_symmetric(b)?;
    if a.nrows() != b.nrows() {
        return Err(Error::Input(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let l = cholesky_factor(b)?;
    let y = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Rank("triangular solve failed".into()))?;
    let mut m = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Rank("triangular solve failed".into()))?;
    symmetrize(&mut m);
    eigenvalues_sym(&m)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_factor(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut sym = b.clone();
    symmetrize(&mut sym);
    let chol = nalgebra::Cholesky::new(sym)
        .ok_or_else(|| Error::Rank("matrix is not positive definite".into()))?;
    let l = chol.unpack();
    let dmax = l.diagonal().amax();
    let dmin = l.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(dmin > 1e-12 * dmax) {
        return Err(Error::Rank(format!(
            "matrix is numerically singular (Cholesky pivot ratio {:e})",
            dmin / dmax
        )));
    }
    Ok(l)
}

/// Spectrum of the sample covariance, tagged with its degrees of freedom.
pub fn sample_spectrum(data: &DataMatrix, center: bool) -> Result<Spectrum> {
    let cov = sample_covariance(data, center)?;
    let df = if center { data.n() - 1 } else { data.n() };
    Ok(eigenvalues_psd(&cov)?.with_source_df(df))
}

/// `log det = p ∫ log x dF̂(x) = Σ log λ_j`.
pub fn log_det_via_esd(s: &Spectrum) -> Result<f64> {
    if let Some(v) = s.eigenvalues().iter().find(|&&v| v <= 0.0) {
        return Err(Error::Domain(format!(
            "log-determinant needs positive eigenvalues, found {v:e}"
        )));
    }
    Ok(s.eigenvalues().iter().map(|v| v.ln()).sum())
}

/// Kolmogorov–Smirnov distance between an ESD and a limit law, evaluated on
/// both sides of every jump of the ESD.
pub fn esd_ks_distance<L: LimitLaw + ?Sized>(esd: &Esd, law: &L) -> f64 {
    esd.jump_points()
        .into_iter()
        .map(|x| {
            let right = (esd.cdf(x) - law.cdf(x)).abs();
            let left = (esd.cdf_left(x) - law.cdf_left(x)).abs();
            right.max(left)
        })
        .fold(0.0, f64::max)
}

/// Dense symmetric matrix from its diagonal.
pub fn diag_matrix(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(values))
}

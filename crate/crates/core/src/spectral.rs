//! Spectral decomposition of the similarity matrix and the classical
//! (Torgerson-style) principal-coordinate embedding built from it: rescaled
//! eigenvectors, low-rank reconstruction, the stress of the truncation, and
//! the stress-vs-dimension elbow curve.
//!
//! The eigensolver is a cyclic Jacobi iteration written here directly: at
//! n of a few hundred the O(n^3) sweeps are cheap, and the core stays free
//! of external numerical dependencies. The similarity matrix is fed to the
//! decomposition as-is (no double centering).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mat::Matrix;
use crate::sim::{format_sig9, ols_fit};

/// Sweep budget for the Jacobi iteration; typical convergence is 8-12 sweeps.
const MAX_SWEEPS: usize = 100;

/// Convergence: off-diagonal Frobenius norm at or below this times ||S||_F.
const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Eigenvalues in descending order paired with orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    /// `eigenvectors[a]` is the unit eigenvector for `eigenvalues[a]`.
    eigenvectors: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, a: usize) -> &[f64] {
        &self.eigenvectors[a]
    }

    /// Sum of eigenvalues (equals the trace of the decomposed matrix).
    pub fn eigenvalue_sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// CSV with columns a,eigenvalue (a is 1-based).
    pub fn write_eigenvalues_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::write(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "a,eigenvalue").map_err(|e| Error::write(path, e))?;
        for (a, lambda) in self.eigenvalues.iter().enumerate() {
            writeln!(out, "{},{}", a + 1, format_sig9(*lambda)).map_err(|e| Error::write(path, e))?;
        }
        out.flush().map_err(|e| Error::write(path, e))
    }

    /// CSV with one eigenvector per row: a,u_1,...,u_n.
    pub fn write_eigenvectors_csv(&self, path: &Path, labels: &[String]) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::write(path, e))?;
        let mut out = BufWriter::new(file);
        write!(out, "a").map_err(|e| Error::write(path, e))?;
        for label in labels {
            write!(out, ",{label}").map_err(|e| Error::write(path, e))?;
        }
        writeln!(out).map_err(|e| Error::write(path, e))?;
        for (a, vector) in self.eigenvectors.iter().enumerate() {
            write!(out, "{}", a + 1).map_err(|e| Error::write(path, e))?;
            for v in vector {
                write!(out, ",{}", format_sig9(*v)).map_err(|e| Error::write(path, e))?;
            }
            writeln!(out).map_err(|e| Error::write(path, e))?;
        }
        out.flush().map_err(|e| Error::write(path, e))
    }
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are sorted descending; each eigenvector is normalized with its
/// largest-magnitude component positive (first such component on ties).
pub fn eigendecompose(m: &Matrix) -> Result<Spectrum> {
    m.require_symmetric(1e-12)?;
    let n = m.n();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let threshold = OFF_DIAGONAL_TOL * m.frobenius_norm();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > threshold {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a.get(y, y).total_cmp(&a.get(x, x)));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n);
    for &k in &order {
        eigenvalues.push(a.get(k, k));
        let mut u: Vec<f64> = (0..n).map(|i| v.get(i, k)).collect();
        fix_sign(&mut u);
        eigenvectors.push(u);
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.n();
    let mut sum = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            sum += a.get(p, q) * a.get(p, q);
        }
    }
    (2.0 * sum).sqrt()
}

/// One Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq == 0.0 {
        return;
    }
    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
    // For very large theta, theta^2 overflows; the rotation angle tends to
    // 1/(2 theta).
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (1.0 + theta * theta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let app = a.get(p, p);
    let aqq = a.get(q, q);
    a.set(p, p, app - t * apq);
    a.set(q, q, aqq + t * apq);
    a.set_sym(p, q, 0.0);

    let n = a.n();
    for i in 0..n {
        if i == p || i == q {
            continue;
        }
        let aip = a.get(i, p);
        let aiq = a.get(i, q);
        a.set_sym(i, p, c * aip - s * aiq);
        a.set_sym(i, q, s * aip + c * aiq);
    }
    for i in 0..n {
        let vip = v.get(i, p);
        let viq = v.get(i, q);
        v.set(i, p, c * vip - s * viq);
        v.set(i, q, s * vip + c * viq);
    }
}

/// Flips the vector so its largest-magnitude component is positive; on ties
/// the first such component decides.
fn fix_sign(u: &mut [f64]) {
    let mut best = 0;
    for (i, value) in u.iter().enumerate() {
        if value.abs() > u[best].abs() {
            best = i;
        }
    }
    if u[best] < 0.0 {
        for value in u.iter_mut() {
            *value = -*value;
        }
    }
}

/// Principal coordinates: `coords[i][a] = sqrt(lambda_a) * u_i_a` for the m
/// largest eigenvalues. Slightly negative eigenvalues (rounding noise) are
/// clamped to zero and their indices reported in `clamped`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalCoordinates {
    /// Embedding dimension.
    pub m: usize,
    /// One row of m coordinates per object.
    coords: Vec<Vec<f64>>,
    /// 0-based eigenvalue indices that were clamped to zero.
    pub clamped: Vec<usize>,
}

impl PrincipalCoordinates {
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i]
    }

    pub fn coordinate(&self, i: usize, a: usize) -> f64 {
        self.coords[i][a]
    }

    /// Mean of each coordinate column.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.coords.len() as f64;
        (0..self.m)
            .map(|a| self.coords.iter().map(|row| row[a]).sum::<f64>() / n)
            .collect()
    }

    /// CSV with target labels and m coordinate columns x1..xm.
    pub fn write_csv(&self, path: &Path, labels: &[String]) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::write(path, e))?;
        let mut out = BufWriter::new(file);
        write!(out, "target").map_err(|e| Error::write(path, e))?;
        for a in 1..=self.m {
            write!(out, ",x{a}").map_err(|e| Error::write(path, e))?;
        }
        writeln!(out).map_err(|e| Error::write(path, e))?;
        for (label, row) in labels.iter().zip(&self.coords) {
            write!(out, "{label}").map_err(|e| Error::write(path, e))?;
            for v in row {
                write!(out, ",{}", format_sig9(*v)).map_err(|e| Error::write(path, e))?;
            }
            writeln!(out).map_err(|e| Error::write(path, e))?;
        }
        out.flush().map_err(|e| Error::write(path, e))
    }
}

/// Embeds into the top-m principal coordinates. An eigenvalue below
/// `-1e-6 * lambda_1` among the first m signals a matrix that is not a valid
/// Gram matrix and is an error.
pub fn principal_coordinates(spectrum: &Spectrum, m: usize) -> Result<PrincipalCoordinates> {
    let n = spectrum.n();
    if m < 1 || m > n {
        return Err(Error::DimensionOutOfRange { m, n });
    }
    let scale = spectrum.eigenvalues[0].max(0.0);
    let threshold = -1e-6 * scale;
    let mut clamped = Vec::new();
    let mut factors = Vec::with_capacity(m);
    for (a, &lambda) in spectrum.eigenvalues.iter().take(m).enumerate() {
        if lambda < threshold {
            return Err(Error::NotPositiveSemidefinite {
                value: lambda,
                threshold,
            });
        }
        if lambda < 0.0 {
            clamped.push(a);
            factors.push(0.0);
        } else {
            factors.push(lambda.sqrt());
        }
    }
    let coords = (0..n)
        .map(|i| {
            (0..m)
                .map(|a| factors[a] * spectrum.eigenvectors[a][i])
                .collect()
        })
        .collect();
    Ok(PrincipalCoordinates { m, coords, clamped })
}

/// Rank-m truncated expansion `sum_{a<=m} lambda_a u_a u_a^T`.
pub fn reconstruct(spectrum: &Spectrum, m: usize) -> Result<Matrix> {
    let n = spectrum.n();
    if m < 1 || m > n {
        return Err(Error::DimensionOutOfRange { m, n });
    }
    let mut out = Matrix::zeros(n);
    for a in 0..m {
        add_term(&mut out, spectrum.eigenvalues[a], &spectrum.eigenvectors[a]);
    }
    Ok(out)
}

fn add_term(acc: &mut Matrix, lambda: f64, u: &[f64]) {
    let n = u.len();
    for i in 0..n {
        for j in i..n {
            let v = acc.get(i, j) + lambda * u[i] * u[j];
            acc.set_sym(i, j, v);
        }
    }
}

/// Stress of the rank-m reconstruction:
/// `Q = sqrt(sum_ij (S_ij - S*_ij)^2 / sum_ij S_ij^2)`, both sums over all
/// n^2 ordered pairs including the diagonal.
pub fn stress(s: &Matrix, spectrum: &Spectrum, m: usize) -> Result<f64> {
    let approx = reconstruct(spectrum, m)?;
    Ok(stress_between(s, &approx))
}

fn stress_between(s: &Matrix, approx: &Matrix) -> f64 {
    let n = s.n();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = s.get(i, j) - approx.get(i, j);
            num += d * d;
            den += s.get(i, j) * s.get(i, j);
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Stress values per embedding dimension, the data behind an elbow plot.
#[derive(Debug, Clone, PartialEq)]
pub struct StressReport {
    /// `(m, Q(m))` for m = 1..=n.
    pub points: Vec<(usize, f64)>,
}

impl StressReport {
    /// Least-squares line over the tail `m in [m_lo, m_hi]`; the slope is
    /// the flattening-rate diagnostic read off an elbow plot.
    pub fn fit_tail(&self, m_lo: usize, m_hi: usize) -> Result<(f64, f64)> {
        let points: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|(m, _)| *m >= m_lo && *m <= m_hi)
            .map(|&(m, q)| (m as f64, q))
            .collect();
        ols_fit(&points).ok_or(Error::BadRankRange {
            lo: m_lo,
            hi: m_hi,
            len: self.points.len(),
        })
    }

    /// Discrete curvature `Q(m+1) - 2Q(m) + Q(m-1)` for interior m. The
    /// choice of an elbow from these diagnostics is left to the reader.
    pub fn discrete_curvature(&self) -> Vec<(usize, f64)> {
        let qs = &self.points;
        (1..qs.len().saturating_sub(1))
            .map(|idx| {
                let (m, q) = qs[idx];
                (m, qs[idx + 1].1 - 2.0 * q + qs[idx - 1].1)
            })
            .collect()
    }

    /// CSV with columns m,q.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::write(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "m,q").map_err(|e| Error::write(path, e))?;
        for (m, q) in &self.points {
            writeln!(out, "{m},{}", format_sig9(*q)).map_err(|e| Error::write(path, e))?;
        }
        out.flush().map_err(|e| Error::write(path, e))
    }

    /// Reads a CSV written by [`StressReport::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
        let mut points = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, ',');
            let m: usize = parts
                .next()
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::parse(path, idx + 1, "bad m"))?;
            let q: f64 = parts
                .next()
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::parse(path, idx + 1, "bad q"))?;
            points.push((m, q));
        }
        Ok(StressReport { points })
    }
}

/// Computes `Q(m)` for every m from an existing spectrum, accumulating the
/// reconstruction one eigenpair at a time.
pub fn stress_curve(s: &Matrix, spectrum: &Spectrum) -> StressReport {
    let n = s.n();
    let mut acc = Matrix::zeros(n);
    let mut points = Vec::with_capacity(n);
    for a in 0..n {
        add_term(&mut acc, spectrum.eigenvalues[a], &spectrum.eigenvectors[a]);
        points.push((a + 1, stress_between(s, &acc)));
    }
    StressReport { points }
}

/// Full elbow test: decomposes the matrix and evaluates the stress for every
/// embedding dimension m = 1..=n.
pub fn elbow_curve(s: &Matrix) -> Result<StressReport> {
    let spectrum = eigendecompose(s)?;
    Ok(stress_curve(s, &spectrum))
}

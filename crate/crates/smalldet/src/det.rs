//! Numerically stable determinants of square and Gram matrices, the
//! adjugate, and the column-append identity.
//!
//! Small-deviation work lives near underflow, so every determinant is
//! carried as a (sign, log-magnitude) pair; the plain `det` field is the
//! exponentiated value and under/overflows outside f64 range.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{streams, substream_rng};

/// Relative pivot threshold: a Cholesky pivot below this times the trace
/// triggers the SVD fallback, and SVD/QR singular values below this times
/// the largest are treated as rank deficiency.
const PIVOT_TOL: f64 = 1e-12;

/// Column count beyond which the Gram matrix is not formed explicitly;
/// QR of Aᵀ avoids squaring the condition number on wide inputs.
const GRAM_QR_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetMethod {
    /// LU with partial pivoting on a square matrix.
    Lu,
    /// Cholesky of the explicitly formed Gram matrix.
    Cholesky,
    /// Singular values of A after a failed Cholesky.
    SvdFallback,
    /// QR of Aᵀ for wide matrices.
    Qr,
    /// Complex LU for det(MM*) = |det M|².
    ComplexLu,
}

/// Determinant in (sign, log-magnitude) form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramResult {
    /// sign · exp(log_abs_det); 0.0 or ±inf when not representable.
    pub det: f64,
    /// ln |det|; −inf for exactly singular input.
    pub log_abs_det: f64,
    /// +1, 0, or −1. Gram determinants never report −1.
    pub sign: i8,
    pub method: DetMethod,
}

impl GramResult {
    fn new(sign: i8, log_abs_det: f64, method: DetMethod) -> Self {
        let det = match sign {
            0 => 0.0,
            s => f64::from(s) * log_abs_det.exp(),
        };
        GramResult {
            det,
            log_abs_det: if sign == 0 {
                f64::NEG_INFINITY
            } else {
                log_abs_det
            },
            sign,
            method,
        }
    }
}

/// In-place LU with partial pivoting on a row-major buffer, accumulating
/// the determinant in log-magnitude form.
pub(crate) fn lu_log_abs_det(buf: &mut [f64], n: usize) -> (i8, f64) {
    debug_assert_eq!(buf.len(), n * n);
    let mut sign = 1i8;
    let mut log_abs = 0.0f64;
    for k in 0..n {
        let mut piv_row = k;
        let mut piv_abs = buf[k * n + k].abs();
        for i in k + 1..n {
            let a = buf[i * n + k].abs();
            if a > piv_abs {
                piv_abs = a;
                piv_row = i;
            }
        }
        if piv_abs == 0.0 {
            return (0, f64::NEG_INFINITY);
        }
        if piv_row != k {
            for j in 0..n {
                buf.swap(k * n + j, piv_row * n + j);
            }
            sign = -sign;
        }
        let piv = buf[k * n + k];
        if piv < 0.0 {
            sign = -sign;
        }
        log_abs += piv.abs().ln();
        for i in k + 1..n {
            let factor = buf[i * n + k] / piv;
            buf[i * n + k] = 0.0;
            for j in k + 1..n {
                buf[i * n + j] -= factor * buf[k * n + j];
            }
        }
    }
    (sign, log_abs)
}

/// Determinant of a square matrix via LU with partial pivoting.
///
/// Never fails: exactly singular input reports sign 0 and −inf
/// log-magnitude.
pub fn square_det(matrix: &DMatrix<f64>) -> Result<GramResult> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "square_det needs a nonempty square matrix, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    let mut buf = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            buf[r * n + c] = matrix[(r, c)];
        }
    }
    let (sign, log_abs) = lu_log_abs_det(&mut buf, n);
    Ok(GramResult::new(sign, log_abs, DetMethod::Lu))
}

/// Cholesky of the explicitly formed Gram matrix, in log form.
/// Returns None when a pivot drops below PIVOT_TOL × trace.
pub(crate) fn gram_log_det_cholesky(
    a: &[f64],
    n: usize,
    m: usize,
    g: &mut [f64],
) -> Option<f64> {
    debug_assert_eq!(a.len(), n * m);
    debug_assert_eq!(g.len(), n * n);
    for r in 0..n {
        for c in 0..=r {
            let mut acc = 0.0;
            for j in 0..m {
                acc += a[r * m + j] * a[c * m + j];
            }
            g[r * n + c] = acc;
        }
    }
    let trace: f64 = (0..n).map(|i| g[i * n + i]).sum();
    let tol = PIVOT_TOL * trace.max(f64::MIN_POSITIVE);

    let mut log_det = 0.0;
    for k in 0..n {
        let mut pivot = g[k * n + k];
        for j in 0..k {
            pivot -= g[k * n + j] * g[k * n + j];
        }
        if pivot <= tol {
            return None;
        }
        let l_kk = pivot.sqrt();
        log_det += pivot.ln();
        g[k * n + k] = l_kk;
        for i in k + 1..n {
            let mut acc = g[i * n + k];
            for j in 0..k {
                acc -= g[i * n + j] * g[k * n + j];
            }
            g[i * n + k] = acc / l_kk;
        }
    }
    Some(log_det)
}

fn gram_det_svd(a: &DMatrix<f64>) -> GramResult {
    let svd = a.clone().svd(false, false);
    let sv = &svd.singular_values;
    let s_max = sv.iter().fold(0.0f64, |acc, &s| acc.max(s));
    if s_max == 0.0 {
        return GramResult::new(0, f64::NEG_INFINITY, DetMethod::SvdFallback);
    }
    let cutoff = PIVOT_TOL * s_max;
    let mut log_det = 0.0;
    for &s in sv.iter() {
        if s <= cutoff {
            return GramResult::new(0, f64::NEG_INFINITY, DetMethod::SvdFallback);
        }
        log_det += 2.0 * s.ln();
    }
    GramResult::new(1, log_det, DetMethod::SvdFallback)
}

fn gram_det_qr(a: &DMatrix<f64>) -> GramResult {
    let qr = a.transpose().qr();
    let r = qr.r();
    let n = a.nrows();
    let r_max = (0..n).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    if r_max == 0.0 {
        return GramResult::new(0, f64::NEG_INFINITY, DetMethod::Qr);
    }
    let cutoff = PIVOT_TOL * r_max;
    let mut log_det = 0.0;
    for i in 0..n {
        let rii = r[(i, i)].abs();
        if rii <= cutoff {
            return GramResult::new(0, f64::NEG_INFINITY, DetMethod::Qr);
        }
        log_det += 2.0 * rii.ln();
    }
    GramResult::new(1, log_det, DetMethod::Qr)
}

/// det(AAᵀ) for an n×m matrix, n ≤ m.
///
/// Narrow inputs form the Gram matrix and run Cholesky, falling back to
/// the singular values of A when a pivot degenerates; wide inputs (m >
/// 64) go through QR of Aᵀ. The result is nonnegative by construction.
pub fn gram_det(a: &DMatrix<f64>) -> Result<GramResult> {
    let (n, m) = (a.nrows(), a.ncols());
    if n == 0 || m == 0 {
        return Err(Error::DimensionMismatch("gram_det needs a nonempty matrix".into()));
    }
    if n > m {
        return Err(Error::DimensionMismatch(format!(
            "gram_det needs n <= m, got {n}x{m}"
        )));
    }
    if m > GRAM_QR_THRESHOLD {
        return Ok(gram_det_qr(a));
    }
    let mut buf = vec![0.0; n * m];
    for r in 0..n {
        for c in 0..m {
            buf[r * m + c] = a[(r, c)];
        }
    }
    let mut g = vec![0.0; n * n];
    match gram_log_det_cholesky(&buf, n, m, &mut g) {
        Some(log_det) => Ok(GramResult::new(1, log_det, DetMethod::Cholesky)),
        None => Ok(gram_det_svd(a)),
    }
}

/// Adjugate det(S)·S⁻¹ of a symmetric positive-definite matrix; the matrix
/// of signed cofactors (−1)^{i+j} M_{ij}, itself symmetric positive
/// definite.
pub fn adjugate(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = s.nrows();
    if n == 0 || s.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "adjugate needs a nonempty square matrix, got {}x{}",
            n,
            s.ncols()
        )));
    }
    let scale = s.amax().max(f64::MIN_POSITIVE);
    for r in 0..n {
        for c in r + 1..n {
            if (s[(r, c)] - s[(c, r)]).abs() > 1e-8 * scale {
                return Err(Error::NotPositiveDefinite(format!(
                    "matrix is not symmetric at ({},{})",
                    r + 1,
                    c + 1
                )));
            }
        }
    }
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    let det = chol.determinant();
    let mut adj = chol.inverse() * det;
    // symmetrize away the inversion roundoff
    for r in 0..n {
        for c in r + 1..n {
            let avg = 0.5 * (adj[(r, c)] + adj[(c, r)]);
            adj[(r, c)] = avg;
            adj[(c, r)] = avg;
        }
    }
    Ok(adj)
}

/// Both sides of the Gram column-append identity
/// det(BBᵀ) − det(AAᵀ) = aᵀ · adj(AAᵀ) · a with B = [A | a].
#[derive(Debug, Clone, Copy)]
pub struct ColumnAppendCheck {
    /// det(BBᵀ) − det(AAᵀ).
    pub lhs: f64,
    /// aᵀ · adj(AAᵀ) · a.
    pub rhs: f64,
    /// lhs − rhs; zero in exact arithmetic.
    pub gap: f64,
}

/// Evaluate the column-append identity for A (n×m, AAᵀ positive definite)
/// and an appended column `a`.
pub fn append_column_identity_check(
    a: &DMatrix<f64>,
    column: &DVector<f64>,
) -> Result<ColumnAppendCheck> {
    let (n, m) = (a.nrows(), a.ncols());
    if column.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "column has length {}, matrix has {n} rows",
            column.len()
        )));
    }
    if n > m {
        return Err(Error::DimensionMismatch(format!(
            "need n <= m, got {n}x{m}"
        )));
    }
    let gram = a * a.transpose();
    let adj = adjugate(&gram)?;

    let mut b = DMatrix::zeros(n, m + 1);
    b.view_mut((0, 0), (n, m)).copy_from(a);
    b.set_column(m, column);

    let det_a = gram_det(a)?.det;
    let det_b = gram_det(&b)?.det;
    let lhs = det_b - det_a;
    let rhs = (column.transpose() * &adj * column)[(0, 0)];
    Ok(ColumnAppendCheck {
        lhs,
        rhs,
        gap: lhs - rhs,
    })
}

/// Convention for "standard complex Gaussian" entries; the paper-facing
/// default is unit complex variance (E|m|² = 1, i.e. Re and Im independent
/// N(0, 1/2)). The alternative puts unit variance on each part
/// (E|m|² = 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComplexConvention {
    #[default]
    UnitComplexVariance,
    UnitPerPart,
}

impl ComplexConvention {
    fn part_sigma(self) -> f64 {
        match self {
            ComplexConvention::UnitComplexVariance => std::f64::consts::FRAC_1_SQRT_2,
            ComplexConvention::UnitPerPart => 1.0,
        }
    }
}

/// det(MM*) = |det M|² for M with i.i.d. complex Gaussian entries, via
/// complex LU accumulated in log magnitude.
pub fn complex_gaussian_det(n: usize, seed: u64, convention: ComplexConvention) -> Result<f64> {
    complex_gaussian_det_indexed(n, seed, 0, convention)
}

/// Indexed variant for bulk sampling: draw number `index` of the
/// substream keyed by `seed`.
pub fn complex_gaussian_det_indexed(
    n: usize,
    seed: u64,
    index: u64,
    convention: ComplexConvention,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("order must be >= 1".into()));
    }
    let mut rng = substream_rng(seed, streams::COMPLEX_DET, index);
    let sigma = convention.part_sigma();
    let mut buf: Vec<Complex64> = (0..n * n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sigma * re, sigma * im)
        })
        .collect();
    let log_sq = complex_lu_log_det_sq(&mut buf, n);
    Ok(log_sq.exp())
}

/// ln |det M|² by complex LU with partial pivoting on |·|².
fn complex_lu_log_det_sq(buf: &mut [Complex64], n: usize) -> f64 {
    let mut log_sq = 0.0f64;
    for k in 0..n {
        let mut piv_row = k;
        let mut piv_norm = buf[k * n + k].norm_sqr();
        for i in k + 1..n {
            let a = buf[i * n + k].norm_sqr();
            if a > piv_norm {
                piv_norm = a;
                piv_row = i;
            }
        }
        if piv_norm == 0.0 {
            return f64::NEG_INFINITY;
        }
        if piv_row != k {
            for j in 0..n {
                buf.swap(k * n + j, piv_row * n + j);
            }
        }
        let piv = buf[k * n + k];
        log_sq += piv_norm.ln();
        for i in k + 1..n {
            let factor = buf[i * n + k] / piv;
            for j in k + 1..n {
                let delta = factor * buf[k * n + j];
                buf[i * n + j] -= delta;
            }
        }
    }
    log_sq
}

/// Parse the whitespace matrix format: first line `n m`, then n rows of m
/// values.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let fail = |line: usize, msg: String| Error::SpecParse(format!("matrix:{line}: {msg}"));
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (lno, header) = lines
        .next()
        .ok_or_else(|| fail(1, "empty input, expected header 'n m'".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| fail(lno, format!("header must be 'n m', got {header:?}")))?;
    let [n, m] = dims[..] else {
        return Err(fail(lno, format!("header must be 'n m', got {header:?}")));
    };
    if n == 0 || m == 0 {
        return Err(fail(lno, "dimensions must be positive".into()));
    }
    let mut out = DMatrix::zeros(n, m);
    for r in 0..n {
        let (lno, line) = lines
            .next()
            .ok_or_else(|| fail(0, format!("expected {n} matrix rows")))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| fail(lno, format!("row is not numeric: {line:?}")))?;
        if row.len() != m {
            return Err(fail(lno, format!("row has {} values, expected {m}", row.len())));
        }
        for (c, v) in row.into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    if let Some((lno, _)) = lines.next() {
        return Err(fail(lno, "trailing content after matrix rows".into()));
    }
    Ok(out)
}

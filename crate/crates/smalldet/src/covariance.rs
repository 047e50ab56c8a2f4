//! Covariance models for the joint Gaussian law of the entry array.
//!
//! A spec is either a named generator with parameters or a dense symmetric
//! matrix read from a text file together with the entry order its rows refer
//! to. `materialize_covariance` turns a spec into the covariance matrix of
//! the entry vector in a requested [`EntryOrdering`], validating positive
//! semidefiniteness by attempting a pivoted Cholesky factorization.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ordering::{EntryIndex, EntryOrdering};

/// Relative pivot threshold below which a diagonal is treated as zero
/// during the semidefinite factorization.
pub const PSD_ZERO_TOL: f64 = 1e-12;
/// Relative threshold beyond which a negative pivot is an error rather
/// than roundoff.
pub const PSD_NEG_TOL: f64 = 1e-8;

/// Joint Gaussian law of the entry array (τ_ij), specified per entry pair.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    /// Independent standard Gaussian entries.
    Iid,
    /// Diagonal random matrix: off-diagonal entries are identically zero,
    /// diagonal entries independent with standard deviations `sigmas`
    /// (all 1 when `None`).
    DiagonalScaled { sigmas: Option<Vec<f64>> },
    /// Unit variances, correlation `rho` between every pair of entries.
    Equicorrelated { rho: f64 },
    /// Correlation `rho^|a-b|` between positions a, b of the ordering.
    Ar1 { rho: f64 },
    /// Explicit dense covariance loaded from a file.
    Dense(DenseCovariance),
}

/// Dense covariance over an explicit entry order, as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCovariance {
    pub n: usize,
    pub m: usize,
    /// File's own entry order; `matrix` rows/columns refer to it.
    pub order: Vec<EntryIndex>,
    pub matrix: DMatrix<f64>,
    source: String,
}

impl CovarianceSpec {
    /// Parse the CLI/config syntax: whitespace-separated `key=value` pairs,
    /// e.g. `kind=equicorrelated rho=0.5` or `kind=dense file=cov.txt`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kind: Option<String> = None;
        let mut rho: Option<f64> = None;
        let mut sigmas: Option<Vec<f64>> = None;
        let mut file: Option<String> = None;

        for token in text.split_whitespace() {
            let (key, value) = token.split_once('=').ok_or_else(|| {
                Error::SpecParse(format!("expected key=value, got {token:?}"))
            })?;
            match key {
                "kind" => kind = Some(value.to_string()),
                "rho" => {
                    rho = Some(value.parse().map_err(|_| {
                        Error::SpecParse(format!("rho is not a number: {value:?}"))
                    })?)
                }
                "sigmas" => {
                    let parsed: std::result::Result<Vec<f64>, _> =
                        value.split(',').map(str::parse).collect();
                    sigmas = Some(parsed.map_err(|_| {
                        Error::SpecParse(format!("sigmas is not a comma list of numbers: {value:?}"))
                    })?);
                }
                "file" => file = Some(value.to_string()),
                other => {
                    return Err(Error::SpecParse(format!("unknown spec key {other:?}")));
                }
            }
        }

        let kind = kind.ok_or_else(|| Error::SpecParse("missing kind=...".into()))?;
        let require_rho = |rho: Option<f64>| {
            rho.ok_or_else(|| Error::SpecParse(format!("kind={kind} requires rho=...")))
        };
        match kind.as_str() {
            "iid" => Ok(CovarianceSpec::Iid),
            "diagonal-scaled" => {
                if let Some(s) = &sigmas {
                    if s.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                        return Err(Error::SpecParse("sigmas must be finite and >= 0".into()));
                    }
                }
                Ok(CovarianceSpec::DiagonalScaled { sigmas })
            }
            "equicorrelated" => {
                let rho = require_rho(rho)?;
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(Error::SpecParse(format!(
                        "equicorrelated rho must lie in [-1, 1], got {rho}"
                    )));
                }
                Ok(CovarianceSpec::Equicorrelated { rho })
            }
            "ar1" => {
                let rho = require_rho(rho)?;
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(Error::SpecParse(format!(
                        "ar1 rho must lie in [-1, 1], got {rho}"
                    )));
                }
                Ok(CovarianceSpec::Ar1 { rho })
            }
            "dense" => {
                let file = file
                    .ok_or_else(|| Error::SpecParse("kind=dense requires file=...".into()))?;
                Ok(CovarianceSpec::Dense(DenseCovariance::load(Path::new(&file))?))
            }
            other => Err(Error::SpecParse(format!("unknown covariance kind {other:?}"))),
        }
    }

    /// Canonical one-line description, used in experiment descriptors.
    pub fn descriptor(&self) -> String {
        match self {
            CovarianceSpec::Iid => "iid".to_string(),
            CovarianceSpec::DiagonalScaled { sigmas: None } => "diagonal-scaled".to_string(),
            CovarianceSpec::DiagonalScaled { sigmas: Some(s) } => {
                let mut out = String::from("diagonal-scaled sigmas=");
                for (i, v) in s.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{:.16e}", v);
                }
                out
            }
            CovarianceSpec::Equicorrelated { rho } => format!("equicorrelated rho={rho:.16e}"),
            CovarianceSpec::Ar1 { rho } => format!("ar1 rho={rho:.16e}"),
            CovarianceSpec::Dense(d) => format!("dense {}", d.source),
        }
    }
}

impl DenseCovariance {
    /// Load the dense text format: first line `n m p` with p = n·m, then
    /// p lines `i j` naming the entries in the file's order, then p rows of
    /// p covariance values.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let fail = |line: usize, msg: String| {
            Error::SpecParse(format!("{source_name}:{line}: {msg}"))
        };
        // line numbers refer to nonempty, non-comment lines' true positions
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (lno, header) = lines
            .next()
            .ok_or_else(|| fail(1, "empty file, expected header 'n m p'".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| fail(lno, format!("header must be three integers 'n m p', got {header:?}")))?;
        let [n, m, p] = dims[..] else {
            return Err(fail(lno, format!("header must be 'n m p', got {header:?}")));
        };
        if n == 0 || m == 0 || n > m {
            return Err(fail(lno, format!("need 1 <= n <= m, got n={n} m={m}")));
        }
        if p != n * m {
            return Err(fail(lno, format!("p must equal n*m = {}, got {p}", n * m)));
        }

        let mut order = Vec::with_capacity(p);
        let mut seen = vec![false; n * m];
        for _ in 0..p {
            let (lno, line) = lines
                .next()
                .ok_or_else(|| fail(0, format!("expected {p} entry index lines")))?;
            let pair: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| fail(lno, format!("entry index line must be 'i j', got {line:?}")))?;
            let [i, j] = pair[..] else {
                return Err(fail(lno, format!("entry index line must be 'i j', got {line:?}")));
            };
            if i < 1 || i > n || j < 1 || j > m {
                return Err(fail(lno, format!("entry ({i},{j}) outside the {n}x{m} grid")));
            }
            let flat = (i - 1) * m + (j - 1);
            if seen[flat] {
                return Err(fail(lno, format!("entry ({i},{j}) listed twice")));
            }
            seen[flat] = true;
            order.push(EntryIndex::new(i, j));
        }

        let mut matrix = DMatrix::zeros(p, p);
        for r in 0..p {
            let (lno, line) = lines
                .next()
                .ok_or_else(|| fail(0, format!("expected {p} covariance rows")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| fail(lno, format!("covariance row is not numeric: {line:?}")))?;
            if row.len() != p {
                return Err(fail(
                    lno,
                    format!("covariance row has {} values, expected {p}", row.len()),
                ));
            }
            for (c, v) in row.into_iter().enumerate() {
                matrix[(r, c)] = v;
            }
        }
        if let Some((lno, _)) = lines.next() {
            return Err(fail(lno, "trailing content after covariance rows".into()));
        }

        // symmetry check, then symmetrize to kill roundoff from text parsing
        let scale = matrix.amax().max(1.0);
        for r in 0..p {
            for c in r + 1..p {
                let gap = (matrix[(r, c)] - matrix[(c, r)]).abs();
                if gap > 1e-8 * scale {
                    return Err(Error::SpecParse(format!(
                        "{source_name}: matrix is not symmetric at ({},{}) (gap {gap:.3e})",
                        r + 1,
                        c + 1
                    )));
                }
                let avg = 0.5 * (matrix[(r, c)] + matrix[(c, r)]);
                matrix[(r, c)] = avg;
                matrix[(c, r)] = avg;
            }
        }

        let digest = {
            use sha2::{Digest, Sha256};
            let mut h = Sha256::new();
            for v in matrix.iter() {
                h.update(v.to_bits().to_le_bytes());
            }
            for e in &order {
                h.update((e.row as u64).to_le_bytes());
                h.update((e.col as u64).to_le_bytes());
            }
            let out = h.finalize();
            let mut hex = String::with_capacity(16);
            for b in &out[..8] {
                let _ = write!(hex, "{b:02x}");
            }
            hex
        };

        Ok(DenseCovariance {
            n,
            m,
            order,
            matrix,
            source: format!("sha256={digest}"),
        })
    }
}

/// Covariance matrix of the entry vector listed in `ordering` order.
///
/// Validates positive semidefiniteness by attempting the pivoted
/// factorization used for sampling.
pub fn materialize_covariance(
    spec: &CovarianceSpec,
    ordering: &EntryOrdering,
) -> Result<DMatrix<f64>> {
    let p = ordering.len();
    let matrix = match spec {
        CovarianceSpec::Iid => DMatrix::identity(p, p),
        CovarianceSpec::DiagonalScaled { sigmas } => {
            if let Some(s) = sigmas {
                if s.len() != ordering.n() {
                    return Err(Error::DimensionMismatch(format!(
                        "diagonal-scaled needs {} sigmas, got {}",
                        ordering.n(),
                        s.len()
                    )));
                }
            }
            let mut mat = DMatrix::zeros(p, p);
            for (pos, e) in ordering.entries().iter().enumerate() {
                if e.is_diagonal() {
                    let sigma = sigmas
                        .as_ref()
                        .map(|s| s[e.row - 1])
                        .unwrap_or(1.0);
                    mat[(pos, pos)] = sigma * sigma;
                }
            }
            mat
        }
        CovarianceSpec::Equicorrelated { rho } => {
            DMatrix::from_fn(p, p, |r, c| if r == c { 1.0 } else { *rho })
        }
        CovarianceSpec::Ar1 { rho } => DMatrix::from_fn(p, p, |r, c| {
            rho.powi((r as i32 - c as i32).abs())
        }),
        CovarianceSpec::Dense(dense) => {
            if dense.n != ordering.n() || dense.m != ordering.m() {
                return Err(Error::DimensionMismatch(format!(
                    "dense covariance is for a {}x{} matrix, ordering is {}x{}",
                    dense.n,
                    dense.m,
                    ordering.n(),
                    ordering.m()
                )));
            }
            // permute file order -> requested ordering
            let mut to_ours = vec![0usize; p];
            for (file_pos, e) in dense.order.iter().enumerate() {
                to_ours[file_pos] = ordering
                    .position(*e)
                    .expect("dense entries validated against the grid at parse time");
            }
            let mut mat = DMatrix::zeros(p, p);
            for r in 0..p {
                for c in 0..p {
                    mat[(to_ours[r], to_ours[c])] = dense.matrix[(r, c)];
                }
            }
            mat
        }
    };

    // PSD validation with tolerance
    PsdFactor::compute(&matrix)?;
    Ok(matrix)
}

/// Pivoted Cholesky factorization of a positive semidefinite matrix.
///
/// Produces `perm` and a lower-trapezoidal `l` (p×rank) with
/// `P Σ Pᵀ = L Lᵀ` where `P` maps original index `perm[i]` to pivoted row
/// `i`. Degenerate directions get a zeroed trailing block rather than an
/// error, which is what lets rank-deficient specs (d_k = 0) still sample.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    perm: Vec<usize>,
    l: DMatrix<f64>,
    rank: usize,
    dim: usize,
}

impl PsdFactor {
    pub fn compute(sigma: &DMatrix<f64>) -> Result<Self> {
        let p = sigma.nrows();
        if sigma.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square, got {}x{}",
                p,
                sigma.ncols()
            )));
        }
        let mut work = sigma.clone();
        let mut perm: Vec<usize> = (0..p).collect();
        let scale = (0..p)
            .map(|i| sigma[(i, i)].abs())
            .fold(0.0_f64, f64::max)
            .max(1.0);

        let mut rank = p;
        for j in 0..p {
            // largest remaining diagonal as pivot
            let (q, dmax) = (j..p)
                .map(|i| (i, work[(i, i)]))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty remaining block");
            if dmax < -PSD_NEG_TOL * scale {
                return Err(Error::NotPositiveSemidefinite(format!(
                    "diagonal pivot {dmax:.3e} below -{PSD_NEG_TOL:e} x scale at step {j}"
                )));
            }
            if dmax <= PSD_ZERO_TOL * scale {
                // remaining block must be ~zero for PSD input; verify
                for r in j..p {
                    for c in j..p {
                        if work[(r, c)].abs() > PSD_NEG_TOL * scale {
                            return Err(Error::NotPositiveSemidefinite(format!(
                                "residual block entry {:.3e} after rank {j}",
                                work[(r, c)]
                            )));
                        }
                    }
                }
                rank = j;
                break;
            }
            if q != j {
                work.swap_rows(j, q);
                work.swap_columns(j, q);
                perm.swap(j, q);
            }
            let piv = work[(j, j)].sqrt();
            work[(j, j)] = piv;
            for i in j + 1..p {
                work[(i, j)] /= piv;
            }
            // keep the trailing Schur block fully symmetric so the
            // row/column swaps above stay valid
            for r in j + 1..p {
                let lrj = work[(r, j)];
                for c in j + 1..=r {
                    let delta = lrj * work[(c, j)];
                    work[(r, c)] -= delta;
                    if r != c {
                        work[(c, r)] -= delta;
                    }
                }
            }
        }

        let mut l = DMatrix::zeros(p, rank);
        for j in 0..rank {
            for i in j..p {
                l[(i, j)] = work[(i, j)];
            }
        }
        Ok(PsdFactor {
            perm,
            l,
            rank,
            dim: p,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Apply the factor to a standard normal vector `z` (length = rank),
    /// writing a draw from N(0, Σ) into `out` (length = dim).
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let slots: Vec<usize> = self.perm.clone();
        self.apply_to_slots(z, &slots, out);
    }

    /// As `apply`, but pivoted row i lands at `slots[i]` instead of
    /// `perm[i]`; lets callers fold their own layout permutation into the
    /// scatter.
    pub(crate) fn apply_to_slots(&self, z: &[f64], slots: &[usize], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.rank);
        debug_assert_eq!(slots.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = 0.0;
            // L is lower-trapezoidal in pivoted coordinates
            let cols = self.rank.min(i + 1);
            for (j, &zj) in z[..cols].iter().enumerate() {
                acc += self.l[(i, j)] * zj;
            }
            out[slots[i]] = acc;
        }
    }

    /// Original index of pivoted row i.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Reconstruct P L Lᵀ Pᵀ, for tests and diagnostics.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let llt = &self.l * self.l.transpose();
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out[(self.perm[r], self.perm[c])] = llt[(r, c)];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordering::build_ordering;
    use approx::assert_relative_eq;

    #[test]
    fn iid_is_identity() {
        let ord = build_ordering(2, 3).unwrap();
        let cov = materialize_covariance(&CovarianceSpec::Iid, &ord).unwrap();
        assert_eq!(cov, DMatrix::identity(6, 6));
    }

    #[test]
    fn equicorrelated_zero_rho_degenerates_to_iid() {
        let ord = build_ordering(2, 2).unwrap();
        let cov =
            materialize_covariance(&CovarianceSpec::Equicorrelated { rho: 0.0 }, &ord).unwrap();
        assert_eq!(cov, DMatrix::identity(4, 4));
    }

    #[test]
    fn equicorrelated_half_rho_eigenvalues() {
        // size-3 entry vector: ordering for a 1x3 matrix
        let ord = build_ordering(1, 3).unwrap();
        let cov =
            materialize_covariance(&CovarianceSpec::Equicorrelated { rho: 0.5 }, &ord).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 1.0 } else { 0.5 };
                assert_eq!(cov[(r, c)], want);
            }
        }
        // eigenvalues of (1-rho)I + rho J: 1-rho (twice) and 1+2rho
        let mut eig = cov.symmetric_eigen().eigenvalues.as_slice().to_vec();
        eig.sort_by(f64::total_cmp);
        assert_relative_eq!(eig[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(eig[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(eig[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn non_psd_equicorrelated_rejected() {
        // rho < -1/(p-1) makes the matrix indefinite; p = 4 here
        let ord = build_ordering(2, 2).unwrap();
        let err = materialize_covariance(&CovarianceSpec::Equicorrelated { rho: -0.5 }, &ord);
        assert!(matches!(err, Err(Error::NotPositiveSemidefinite(_))));
    }

    #[test]
    fn pivoted_factor_reconstructs_full_rank() {
        let ord = build_ordering(2, 2).unwrap();
        let cov =
            materialize_covariance(&CovarianceSpec::Ar1 { rho: 0.6 }, &ord).unwrap();
        let f = PsdFactor::compute(&cov).unwrap();
        assert_eq!(f.rank(), 4);
        let back = f.reconstruct();
        assert_relative_eq!((back - cov).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pivoted_factor_handles_semidefinite() {
        // tau_22 = tau_11 exactly: rank 3 out of 4
        let d = perfectly_correlated_dense();
        let ord = build_ordering(2, 2).unwrap();
        let cov = materialize_covariance(&CovarianceSpec::Dense(d), &ord).unwrap();
        let f = PsdFactor::compute(&cov).unwrap();
        assert_eq!(f.rank(), 3);
        let back = f.reconstruct();
        assert_relative_eq!((back - cov).amax(), 0.0, epsilon = 1e-12);
    }

    pub(crate) fn perfectly_correlated_dense() -> DenseCovariance {
        // identity covariance except Cov(tau_11, tau_22) = 1
        let text = "\
2 2 4
1 1
1 2
2 1
2 2
1 0 0 1
0 1 0 0
0 0 1 0
1 0 0 1
";
        DenseCovariance::parse(text, "inline").unwrap()
    }

    #[test]
    fn dense_parse_round_trip_and_permutation() {
        // file lists entries in a shuffled order; materialization permutes
        let text = "\
1 2 2
1 2
1 1
1.0 0.25
0.25 2.0
";
        let dense = DenseCovariance::parse(text, "inline").unwrap();
        let ord = build_ordering(1, 2).unwrap();
        let cov =
            materialize_covariance(&CovarianceSpec::Dense(dense), &ord).unwrap();
        // ordering lists (1,1) then (1,2); file listed (1,2) first
        assert_eq!(cov[(0, 0)], 2.0);
        assert_eq!(cov[(1, 1)], 1.0);
        assert_eq!(cov[(0, 1)], 0.25);
    }

    #[test]
    fn dense_parse_errors_carry_line_numbers() {
        let bad_header = DenseCovariance::parse("2 2 5\n", "cov.txt");
        let msg = bad_header.unwrap_err().to_string();
        assert!(msg.contains("cov.txt:1"), "got {msg}");

        let bad_entry = DenseCovariance::parse("1 1 1\n9 9\n1.0\n", "cov.txt");
        let msg = bad_entry.unwrap_err().to_string();
        assert!(msg.contains("cov.txt:2"), "got {msg}");

        let bad_row = DenseCovariance::parse("1 1 1\n1 1\n1.0 2.0\n", "cov.txt");
        let msg = bad_row.unwrap_err().to_string();
        assert!(msg.contains("cov.txt:3"), "got {msg}");
    }

    #[test]
    fn dense_rejects_asymmetry_and_negative_eigenvalue() {
        let asym = "\
1 2 2
1 1
1 2
1.0 0.5
0.1 1.0
";
        assert!(DenseCovariance::parse(asym, "inline").is_err());

        let indefinite = "\
1 2 2
1 1
1 2
1.0 2.0
2.0 1.0
";
        let dense = DenseCovariance::parse(indefinite, "inline").unwrap();
        let ord = build_ordering(1, 2).unwrap();
        let err = materialize_covariance(&CovarianceSpec::Dense(dense), &ord);
        assert!(matches!(err, Err(Error::NotPositiveSemidefinite(_))));
    }

    #[test]
    fn spec_parse_syntax() {
        assert_eq!(CovarianceSpec::parse("kind=iid").unwrap(), CovarianceSpec::Iid);
        assert_eq!(
            CovarianceSpec::parse("kind=equicorrelated rho=0.5").unwrap(),
            CovarianceSpec::Equicorrelated { rho: 0.5 }
        );
        assert_eq!(
            CovarianceSpec::parse("kind=diagonal-scaled sigmas=1,2,3").unwrap(),
            CovarianceSpec::DiagonalScaled {
                sigmas: Some(vec![1.0, 2.0, 3.0])
            }
        );
        assert!(CovarianceSpec::parse("kind=unknown").is_err());
        assert!(CovarianceSpec::parse("kind=equicorrelated").is_err());
        assert!(CovarianceSpec::parse("kind=iid bogus=1").is_err());
        assert!(CovarianceSpec::parse("equicorrelated").is_err());
    }
}

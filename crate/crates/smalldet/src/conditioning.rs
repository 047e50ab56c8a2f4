//! Conditional residual variances d_k.
//!
//! d_k is the minimum mean-squared error of linearly predicting the
//! diagonal entry τ_kk from every entry τ_ij with min(i,j) < k (restricted
//! to the n×m truncation): the Schur complement
//! `Var(τ_kk) − cᵀ Σ⁺ c` of the conditioning block in the joint covariance,
//! with the pseudo-inverse honoring a relative rank cutoff.

use nalgebra::{DMatrix, DVector};

use crate::covariance::{materialize_covariance, CovarianceSpec};
use crate::error::{Error, Result};
use crate::ordering::build_ordering;

/// Singular values below this fraction of the largest are treated as zero
/// in the conditioning-block pseudo-inverse.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Conditional residual variances d_1..d_n and the derived ε₀ divisor.
#[derive(Debug, Clone, PartialEq)]
pub struct DValues {
    values: Vec<f64>,
    epsilon0_scale: f64,
}

impl DValues {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// ∏ d_k^{1/2}; zero iff some d_k is zero.
    pub fn epsilon0_scale(&self) -> f64 {
        self.epsilon0_scale
    }

    /// Rescaled threshold ε₀ = ε / ∏ d_k^{1/2}.
    ///
    /// Errors when some d_k = 0, where the rescaling is undefined.
    pub fn rescale_eps(&self, eps: f64) -> Result<f64> {
        if let Some(index) = self.values.iter().position(|&d| d == 0.0) {
            return Err(Error::ZeroDValue { index: index + 1 });
        }
        Ok(eps / self.epsilon0_scale)
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        let epsilon0_scale = if values.contains(&0.0) {
            0.0
        } else {
            values.iter().map(|d| d.sqrt()).product()
        };
        DValues {
            values,
            epsilon0_scale,
        }
    }
}

/// Compute d_1..d_n for the n×m truncation of a covariance spec.
pub fn compute_d_values(spec: &CovarianceSpec, n: usize, m: usize) -> Result<DValues> {
    let ordering = build_ordering(n, m)?;
    let sigma = materialize_covariance(spec, &ordering)?;

    let mut values = Vec::with_capacity(n);
    for k in 1..=n {
        let prefix = ordering.conditioning_prefix_len(k);
        let diag_pos = ordering.diagonal_position(k);
        let var = sigma[(diag_pos, diag_pos)];
        let explained = if prefix == 0 {
            0.0
        } else {
            let block = sigma.view((0, 0), (prefix, prefix)).into_owned();
            let cross = DVector::from_fn(prefix, |i, _| sigma[(i, diag_pos)]);
            quadratic_form_pinv(&block, &cross)
        };
        let d = var - explained;
        let tol = 1e-8 * var.max(1.0);
        if d < -tol {
            return Err(Error::NotPositiveSemidefinite(format!(
                "residual variance d_{k} = {d:.3e} is negative beyond tolerance"
            )));
        }
        values.push(d.max(0.0));
    }
    Ok(DValues::from_values(values))
}

/// cᵀ Σ⁺ c through a symmetric eigendecomposition, dropping eigenvalues
/// below `RANK_CUTOFF` times the largest.
fn quadratic_form_pinv(sigma: &DMatrix<f64>, c: &DVector<f64>) -> f64 {
    let eig = sigma.clone().symmetric_eigen();
    let lambda_max = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    if lambda_max == 0.0 {
        return 0.0;
    }
    let cutoff = RANK_CUTOFF * lambda_max;
    let mut acc = 0.0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let proj = eig.eigenvectors.column(i).dot(c);
            acc += proj * proj / lambda;
        }
    }
    acc
}

//! Small-deviation probabilities of determinants of jointly Gaussian
//! random matrices.
//!
//! The toolkit computes the exact and asymptotic law of products of
//! absolute standard Gaussians, the conditional residual variances d_k
//! that normalize a general jointly Gaussian entry array, numerically
//! stable (log-magnitude) determinants of square and Gram matrices, and
//! seeded, mergeable Monte Carlo estimates that verify the product-law
//! upper bound
//!
//! ```text
//! P(|det_n| <= eps) <= P(|X_1 ... X_n| <= eps_0),   eps_0 = eps / prod d_k^{1/2}
//! ```
//!
//! for X_j i.i.d. N(0,1), with equality for diagonal matrices with
//! independent entries.

pub use nalgebra;

pub mod conditioning;
pub mod covariance;
pub mod det;
pub mod error;
pub mod mc;
pub mod ordering;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod scalar;

pub use conditioning::{compute_d_values, DValues};
pub use covariance::{materialize_covariance, CovarianceSpec, DenseCovariance, PsdFactor};
pub use det::{
    adjugate, append_column_identity_check, complex_gaussian_det, complex_gaussian_det_indexed,
    gram_det, parse_matrix, square_det, ColumnAppendCheck, ComplexConvention, DetMethod,
    GramResult,
};
pub use error::{Error, Result};
pub use mc::{
    bound_check, clopper_pearson, estimate_det_small_dev, estimate_det_small_dev_range, ks_fit,
    kolmogorov_sf, BoundCheckRow, DetEvent, Experiment, KSResult, McConfig, McSeedRecord,
    MonteCarloEstimate,
};
pub use ordering::{build_ordering, EntryIndex, EntryOrdering};
pub use sampling::{sample_matrix, MatrixSampler, SampledMatrix, SeedRecord};
pub use scalar::{
    asymptotic_product_prob, build_product_law, corollary_bound, gaussian_interval_prob,
    log_abs_gaussian_density, GammaProductLaw, GammaProductSpec, GridConfig, ProductLawTable,
};

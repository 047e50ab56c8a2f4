//! Scalar laws: one-dimensional Gaussian primitives, the exact and
//! asymptotic law of ∏ |X_j|, and gamma-product distributions.

mod convolve;
pub mod gamma;
pub mod gaussian;
pub mod product_law;

pub use gamma::{GammaProductLaw, GammaProductSpec};
pub use gaussian::{
    abs_normal_cdf, gaussian_interval_prob, log_abs_gaussian_cdf, log_abs_gaussian_density,
    normal_cdf, TWO_OVER_SQRT_2PI,
};
pub use product_law::{
    asymptotic_product_prob, build_product_law, corollary_bound, GridConfig, ProductLawTable,
};

//! C ABI over the smalldet toolkit.
//!
//! Conventions: every fallible call returns an [`SmStatus`]; results come
//! back through out-pointers; covariance specs and product-law tables are
//! opaque handles with explicit `_free` functions. The most recent error
//! message of the calling thread is available through
//! [`sm_last_error_message`]. All functions catch panics and report them
//! as [`SmStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use smalldet::{
    ComplexConvention, CovarianceSpec, DetEvent, Error, GridConfig, McConfig, ProductLawTable,
};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmStatus {
    Ok = 0,
    /// A scalar argument was out of range.
    InvalidArgument = 1,
    /// Matrix, ordering, or buffer dimensions disagree.
    DimensionMismatch = 2,
    /// Covariance failed the positive-semidefiniteness check.
    NotPositiveSemidefinite = 3,
    /// A matrix that must be positive definite is not.
    NotPositiveDefinite = 4,
    /// A table query left the tabulated grid.
    OutOfRange = 5,
    /// Some conditional residual variance d_k is zero.
    ZeroDValue = 6,
    /// Spec string or file failed to parse.
    ParseError = 7,
    /// I/O failure while loading a dense covariance file.
    IoError = 8,
    /// A required pointer was null.
    NullPointer = 9,
    /// Text passed across the boundary was not valid UTF-8.
    InvalidUtf8 = 10,
    /// An internal invariant failed (caught panic).
    Internal = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.into());
}

fn status_of(err: &Error) -> SmStatus {
    match err {
        Error::InvalidArgument(_) => SmStatus::InvalidArgument,
        Error::DimensionMismatch(_) => SmStatus::DimensionMismatch,
        Error::NotPositiveSemidefinite(_) => SmStatus::NotPositiveSemidefinite,
        Error::NotPositiveDefinite(_) => SmStatus::NotPositiveDefinite,
        Error::OutOfRange(_) => SmStatus::OutOfRange,
        Error::ZeroDValue { .. } => SmStatus::ZeroDValue,
        Error::SpecParse(_) => SmStatus::ParseError,
        Error::IncompatibleEstimates(_) => SmStatus::InvalidArgument,
        Error::Io { .. } => SmStatus::IoError,
    }
}

fn fail(err: Error) -> SmStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

/// Run a fallible body, translating panics into `Internal`.
fn guarded(body: impl FnOnce() -> SmStatus) -> SmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SmStatus::Internal
        }
    }
}

/// Copy the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `cap`). Returns the full message length.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (then only the
/// length is returned).
#[no_mangle]
pub unsafe extern "C" fn sm_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// NUL-terminated library version; storage is static.
#[no_mangle]
pub extern "C" fn sm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque covariance spec handle.
pub struct SmCovarianceSpec {
    inner: CovarianceSpec,
}

/// Opaque product-law table handle.
pub struct SmProductLawTable {
    inner: ProductLawTable,
}

/// Parse a covariance spec from the CLI syntax, e.g.
/// `kind=equicorrelated rho=0.5`. On success `*out` owns the handle;
/// release it with `sm_spec_free`.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sm_spec_parse(
    text: *const c_char,
    out: *mut *mut SmCovarianceSpec,
) -> SmStatus {
    if text.is_null() || out.is_null() {
        set_error("null pointer");
        return SmStatus::NullPointer;
    }
    let text = match CStr::from_ptr(text).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("spec text is not valid UTF-8");
            return SmStatus::InvalidUtf8;
        }
    };
    guarded(|| match CovarianceSpec::parse(text) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(SmCovarianceSpec { inner }));
            SmStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Release a spec handle; null is a no-op.
///
/// # Safety
/// `spec` must come from `sm_spec_parse` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sm_spec_free(spec: *mut SmCovarianceSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Conditional residual variances d_1..d_n for the n×m truncation.
/// `out_d` receives n values; `out_eps0_scale` (optional) the divisor
/// ∏ d_k^{1/2}.
///
/// # Safety
/// `spec` must be a live handle; `out_d` must point to n writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sm_d_values(
    spec: *const SmCovarianceSpec,
    n: usize,
    m: usize,
    out_d: *mut f64,
    out_eps0_scale: *mut f64,
) -> SmStatus {
    if spec.is_null() || out_d.is_null() {
        set_error("null pointer");
        return SmStatus::NullPointer;
    }
    let spec = &(*spec).inner;
    guarded(|| match smalldet::compute_d_values(spec, n, m) {
        Ok(d) => {
            std::ptr::copy_nonoverlapping(d.values().as_ptr(), out_d, d.len());
            if !out_eps0_scale.is_null() {
                *out_eps0_scale = d.epsilon0_scale();
            }
            SmStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Build the product-law table for n factors on the default grid
/// (t in [-45, 6], step 2^-7). Release with `sm_product_law_free`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sm_product_law_build(
    n: usize,
    out: *mut *mut SmProductLawTable,
) -> SmStatus {
    sm_product_law_build_with_grid(
        n,
        GridConfig::default().t_min,
        GridConfig::default().t_max,
        GridConfig::default().step,
        out,
    )
}

/// Build the product-law table on a custom log-eps grid.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sm_product_law_build_with_grid(
    n: usize,
    t_min: f64,
    t_max: f64,
    step: f64,
    out: *mut *mut SmProductLawTable,
) -> SmStatus {
    if out.is_null() {
        set_error("null pointer");
        return SmStatus::NullPointer;
    }
    let cfg = GridConfig {
        t_min,
        t_max,
        step,
        ..GridConfig::default()
    };
    guarded(|| match smalldet::build_product_law(n, &cfg) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(SmProductLawTable { inner }));
            SmStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// P(∏ |X_j| <= eps) from a built table.
///
/// # Safety
/// `table` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sm_product_law_cdf(
    table: *const SmProductLawTable,
    eps: f64,
    out: *mut f64,
) -> SmStatus {
    if table.is_null() || out.is_null() {
        set_error("null pointer");
        return SmStatus::NullPointer;
    }
    let table = &(*table).inner;
    guarded(|| match table.small_dev_prob(eps) {
        Ok(p) => {
            *out = p;
            SmStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// The table's combined truncation + quadrature error estimate.
///
/// # Safety
/// `table` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_product_law_error_estimate(table: *const SmProductLawTable) -> f64 {
    if table.is_null() {
        return f64::NAN;
    }
    (*table).inner.error_estimate()
}

/// Release a table handle; null is a no-op.
///
/// # Safety
/// `table` must come from a build call and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sm_product_law_free(table: *mut SmProductLawTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// (2/√(2π))^n · eps · |log eps|^{n-1} / (n-1)!, the small-eps equivalent
/// of the product law.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sm_asymptotic_product_prob(
    n: usize,
    eps: f64,
    out: *mut f64,
) -> SmStatus {
    if out.is_null() {
        set_error("null pointer");
        return SmStatus::NullPointer;
    }
    guarded(|| match smalldet::asymptotic_product_prob(n, eps) {
        Ok(v) => {
            *out = v;
            SmStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// P(|Y + shift| <= eps) for Y centered Gaussian with standard deviation
/// sigma.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sm_gaussian_interval_prob(
    sigma: f64,
    shift: f64,
    eps: f64,
    out: *mut f64,
) -> SmStatus {
    if out.is_null() {
        set_error("null pointer");
        return SmStatus::NullPointer;
    }
    guarded(|| match smalldet::gaussian_interval_prob(sigma, shift, eps) {
        Ok(v) => {
            *out = v;
            SmStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// How a determinant was computed.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmDetMethod {
    Lu = 0,
    Cholesky = 1,
    SvdFallback = 2,
    Qr = 3,
    ComplexLu = 4,
}

/// Determinant in (sign, log-magnitude) form; `det` is the exponentiated
/// value and under/overflows outside double range.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SmDetResult {
    pub det: f64,
    pub log_abs_det: f64,
    pub sign: i32,
    pub method: SmDetMethod,
}

fn det_result(r: smalldet::GramResult) -> SmDetResult {
    SmDetResult {
        det: r.det,
        log_abs_det: r.log_abs_det,
        sign: i32::from(r.sign),
        method: match r.method {
            smalldet::DetMethod::Lu => SmDetMethod::Lu,
            smalldet::DetMethod::Cholesky => SmDetMethod::Cholesky,
            smalldet::DetMethod::SvdFallback => SmDetMethod::SvdFallback,
            smalldet::DetMethod::Qr => SmDetMethod::Qr,
            smalldet::DetMethod::ComplexLu => SmDetMethod::ComplexLu,
        },
    }
}

/// Determinant of a row-major n×n matrix via LU with partial pivoting.
///
/// # Safety
/// `data` must point to n·n doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sm_square_det(
    data: *const f64,
    n: usize,
    out: *mut SmDetResult,
) -> SmStatus {
    if data.is_null() || out.is_null() {
        set_error("null pointer");
        return SmStatus::NullPointer;
    }
    let slice = std::slice::from_raw_parts(data, n * n);
    guarded(|| {
        let m = nalgebra_from_rowmajor(slice, n, n);
        match smalldet::square_det(&m) {
            Ok(r) => {
                *out = det_result(r);
                SmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// det(AAᵀ) of a row-major n×m matrix, n <= m.
///
/// # Safety
/// `data` must point to n·m doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sm_gram_det(
    data: *const f64,
    n: usize,
    m: usize,
    out: *mut SmDetResult,
) -> SmStatus {
    if data.is_null() || out.is_null() {
        set_error("null pointer");
        return SmStatus::NullPointer;
    }
    let slice = std::slice::from_raw_parts(data, n * m);
    guarded(|| {
        let a = nalgebra_from_rowmajor(slice, n, m);
        match smalldet::gram_det(&a) {
            Ok(r) => {
                *out = det_result(r);
                SmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

fn nalgebra_from_rowmajor(data: &[f64], n: usize, m: usize) -> smalldet::nalgebra::DMatrix<f64> {
    smalldet::nalgebra::DMatrix::from_fn(n, m, |r, c| data[r * m + c])
}

/// Determinant event selector for Monte Carlo estimation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmDetEvent {
    /// |det M| <= eps for the square matrix (m must equal n).
    SquareAbsDet = 0,
    /// sqrt(det A Aᵀ) < eps.
    GramSqrtDet = 1,
}

/// Monte Carlo estimate with an exact Clopper–Pearson interval.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SmMcEstimate {
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
}

/// Seeded Monte Carlo estimate of the determinant small-deviation
/// probability. Identical (seed, trials) inputs give identical counts for
/// any worker count.
///
/// # Safety
/// `spec` must be a live handle and `out` a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sm_estimate_det_small_dev(
    spec: *const SmCovarianceSpec,
    n: usize,
    m: usize,
    event: SmDetEvent,
    eps: f64,
    trials: u64,
    seed: u64,
    workers: usize,
    confidence: f64,
    out: *mut SmMcEstimate,
) -> SmStatus {
    if spec.is_null() || out.is_null() {
        set_error("null pointer");
        return SmStatus::NullPointer;
    }
    let spec = &(*spec).inner;
    let event = match event {
        SmDetEvent::SquareAbsDet => DetEvent::SquareAbsDet,
        SmDetEvent::GramSqrtDet => DetEvent::GramSqrtDet,
    };
    let cfg = McConfig {
        trials,
        base_seed: seed,
        workers,
        confidence,
    };
    guarded(
        || match smalldet::estimate_det_small_dev(spec, n, m, event, eps, &cfg) {
            Ok(est) => {
                *out = SmMcEstimate {
                    hits: est.hits,
                    trials: est.trials,
                    p_hat: est.p_hat,
                    ci_low: est.ci_low,
                    ci_high: est.ci_high,
                    confidence: est.confidence,
                };
                SmStatus::Ok
            }
            Err(e) => fail(e),
        },
    )
}

/// Convention for complex Gaussian entries.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmComplexConvention {
    /// E|m|² = 1: real and imaginary parts are N(0, 1/2).
    UnitComplexVariance = 0,
    /// Real and imaginary parts are N(0, 1): E|m|² = 2.
    UnitPerPart = 1,
}

/// One seeded draw of det(MM*) for an order-n complex Gaussian matrix.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sm_complex_gaussian_det(
    n: usize,
    seed: u64,
    index: u64,
    convention: SmComplexConvention,
    out: *mut f64,
) -> SmStatus {
    if out.is_null() {
        set_error("null pointer");
        return SmStatus::NullPointer;
    }
    let convention = match convention {
        SmComplexConvention::UnitComplexVariance => ComplexConvention::UnitComplexVariance,
        SmComplexConvention::UnitPerPart => ComplexConvention::UnitPerPart,
    };
    guarded(
        || match smalldet::complex_gaussian_det_indexed(n, seed, index, convention) {
            Ok(v) => {
                *out = v;
                SmStatus::Ok
            }
            Err(e) => fail(e),
        },
    )
}

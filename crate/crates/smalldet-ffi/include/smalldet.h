/* C interface to the smalldet toolkit. */

#ifndef SMALLDET_H
#define SMALLDET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every fallible call.
typedef enum SmStatus {
  SM_STATUS_OK = 0,
  // A scalar argument was out of range.
  SM_STATUS_INVALID_ARGUMENT = 1,
  // Matrix, ordering, or buffer dimensions disagree.
  SM_STATUS_DIMENSION_MISMATCH = 2,
  // Covariance failed the positive-semidefiniteness check.
  SM_STATUS_NOT_POSITIVE_SEMIDEFINITE = 3,
  // A matrix that must be positive definite is not.
  SM_STATUS_NOT_POSITIVE_DEFINITE = 4,
  // A table query left the tabulated grid.
  SM_STATUS_OUT_OF_RANGE = 5,
  // Some conditional residual variance d_k is zero.
  SM_STATUS_ZERO_D_VALUE = 6,
  // Spec string or file failed to parse.
  SM_STATUS_PARSE_ERROR = 7,
  // I/O failure while loading a dense covariance file.
  SM_STATUS_IO_ERROR = 8,
  // A required pointer was null.
  SM_STATUS_NULL_POINTER = 9,
  // Text passed across the boundary was not valid UTF-8.
  SM_STATUS_INVALID_UTF8 = 10,
  // An internal invariant failed (caught panic).
  SM_STATUS_INTERNAL = 11,
} SmStatus;

// How a determinant was computed.
typedef enum SmDetMethod {
  SM_DET_METHOD_LU = 0,
  SM_DET_METHOD_CHOLESKY = 1,
  SM_DET_METHOD_SVD_FALLBACK = 2,
  SM_DET_METHOD_QR = 3,
  SM_DET_METHOD_COMPLEX_LU = 4,
} SmDetMethod;

// Determinant event selector for Monte Carlo estimation.
typedef enum SmDetEvent {
  // |det M| <= eps for the square matrix (m must equal n).
  SM_DET_EVENT_SQUARE_ABS_DET = 0,
  // sqrt(det A Aᵀ) < eps.
  SM_DET_EVENT_GRAM_SQRT_DET = 1,
} SmDetEvent;

// Convention for complex Gaussian entries.
typedef enum SmComplexConvention {
  // E|m|² = 1: real and imaginary parts are N(0, 1/2).
  SM_COMPLEX_CONVENTION_UNIT_COMPLEX_VARIANCE = 0,
  // Real and imaginary parts are N(0, 1): E|m|² = 2.
  SM_COMPLEX_CONVENTION_UNIT_PER_PART = 1,
} SmComplexConvention;

// Opaque covariance spec handle.
typedef struct SmCovarianceSpec SmCovarianceSpec;

// Opaque product-law table handle.
typedef struct SmProductLawTable SmProductLawTable;

// Determinant in (sign, log-magnitude) form; `det` is the exponentiated
// value and under/overflows outside double range.
typedef struct SmDetResult {
  double det;
  double log_abs_det;
  int32_t sign;
  enum SmDetMethod method;
} SmDetResult;

// Monte Carlo estimate with an exact Clopper–Pearson interval.
typedef struct SmMcEstimate {
  uint64_t hits;
  uint64_t trials;
  double p_hat;
  double ci_low;
  double ci_high;
  double confidence;
} SmMcEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the calling thread's last error message into `buf` (NUL
// terminated, truncated to `cap`). Returns the full message length.
//
// # Safety
// `buf` must point to `cap` writable bytes, or be null (then only the
// length is returned).
size_t sm_last_error_message(char *buf, size_t cap);

// NUL-terminated library version; storage is static.
const char *sm_version(void);

// Parse a covariance spec from the CLI syntax, e.g.
// `kind=equicorrelated rho=0.5`. On success `*out` owns the handle;
// release it with `sm_spec_free`.
//
// # Safety
// `text` must be a valid NUL-terminated string and `out` a valid pointer.
enum SmStatus sm_spec_parse(const char *text, struct SmCovarianceSpec **out);

// Release a spec handle; null is a no-op.
//
// # Safety
// `spec` must come from `sm_spec_parse` and not have been freed.
void sm_spec_free(struct SmCovarianceSpec *spec);

// Conditional residual variances d_1..d_n for the n×m truncation.
// `out_d` receives n values; `out_eps0_scale` (optional) the divisor
// ∏ d_k^{1/2}.
//
// # Safety
// `spec` must be a live handle; `out_d` must point to n writable doubles.
enum SmStatus sm_d_values(const struct SmCovarianceSpec *spec,
                          size_t n,
                          size_t m,
                          double *out_d,
                          double *out_eps0_scale);

// Build the product-law table for n factors on the default grid
// (t in [-45, 6], step 2^-7). Release with `sm_product_law_free`.
//
// # Safety
// `out` must be a valid pointer.
enum SmStatus sm_product_law_build(size_t n, struct SmProductLawTable **out);

// Build the product-law table on a custom log-eps grid.
//
// # Safety
// `out` must be a valid pointer.
enum SmStatus sm_product_law_build_with_grid(size_t n,
                                             double t_min,
                                             double t_max,
                                             double step,
                                             struct SmProductLawTable **out);

// P(∏ |X_j| <= eps) from a built table.
//
// # Safety
// `table` must be a live handle and `out` a valid pointer.
enum SmStatus sm_product_law_cdf(const struct SmProductLawTable *table, double eps, double *out);

// The table's combined truncation + quadrature error estimate.
//
// # Safety
// `table` must be a live handle.
double sm_product_law_error_estimate(const struct SmProductLawTable *table);

// Release a table handle; null is a no-op.
//
// # Safety
// `table` must come from a build call and not have been freed.
void sm_product_law_free(struct SmProductLawTable *table);

// (2/√(2π))^n · eps · |log eps|^{n-1} / (n-1)!, the small-eps equivalent
// of the product law.
//
// # Safety
// `out` must be a valid pointer.
enum SmStatus sm_asymptotic_product_prob(size_t n, double eps, double *out);

// P(|Y + shift| <= eps) for Y centered Gaussian with standard deviation
// sigma.
//
// # Safety
// `out` must be a valid pointer.
enum SmStatus sm_gaussian_interval_prob(double sigma, double shift, double eps, double *out);

// Determinant of a row-major n×n matrix via LU with partial pivoting.
//
// # Safety
// `data` must point to n·n doubles; `out` must be valid.
enum SmStatus sm_square_det(const double *data, size_t n, struct SmDetResult *out);

// det(AAᵀ) of a row-major n×m matrix, n <= m.
//
// # Safety
// `data` must point to n·m doubles; `out` must be valid.
enum SmStatus sm_gram_det(const double *data, size_t n, size_t m, struct SmDetResult *out);

// Seeded Monte Carlo estimate of the determinant small-deviation
// probability. Identical (seed, trials) inputs give identical counts for
// any worker count.
//
// # Safety
// `spec` must be a live handle and `out` a valid pointer.
enum SmStatus sm_estimate_det_small_dev(const struct SmCovarianceSpec *spec,
                                        size_t n,
                                        size_t m,
                                        enum SmDetEvent event,
                                        double eps,
                                        uint64_t trials,
                                        uint64_t seed,
                                        size_t workers,
                                        double confidence,
                                        struct SmMcEstimate *out);

// One seeded draw of det(MM*) for an order-n complex Gaussian matrix.
//
// # Safety
// `out` must be a valid pointer.
enum SmStatus sm_complex_gaussian_det(size_t n,
                                      uint64_t seed,
                                      uint64_t index,
                                      enum SmComplexConvention convention,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMALLDET_H */

//! Exact and asymptotic law of ∏ |X_j| for i.i.d. standard Gaussians.
//!
//! The exact CDF is tabulated on a log-epsilon grid: with
//! S_n = Σ log|X_j|, the table holds P(S_n < t) computed by recursive
//! numerical convolution of the n = 1 law with the density of log|X|.
//! The n = 1 base case is the analytic CDF 2Φ(e^t) − 1 rather than a
//! convolved delta, which saves one layer of quadrature error.

use crate::conditioning::DValues;
use crate::error::{Error, Result};
use crate::scalar::convolve::{
    convolve_chain, convolve_extend, pchip_eval, pchip_tangents, FactorDensity, LatticeCdf,
};
use crate::scalar::gaussian::{
    log_abs_gaussian_cdf, log_abs_gaussian_density, TWO_OVER_SQRT_2PI,
};

/// Numerics floor added to every error estimate: summation roundoff and
/// the accuracy of the underlying error function are below this.
const ERROR_FLOOR: f64 = 1e-11;

/// Grid for the product-law table. `t` is log-epsilon; `u` bounds the
/// integration window for the log|X| density, which decays like e^u on the
/// left and double-exponentially on the right. Bounds are snapped outward
/// to the step lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub step: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            t_min: -45.0,
            t_max: 6.0,
            step: 1.0 / 128.0,
            u_min: -45.0,
            u_max: 6.0,
        }
    }
}

impl GridConfig {
    fn validate(&self) -> Result<()> {
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "grid step must be positive, got {}",
                self.step
            )));
        }
        for (name, lo, hi) in [
            ("t", self.t_min, self.t_max),
            ("u", self.u_min, self.u_max),
        ] {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "{name} bounds must satisfy min < max, got [{lo}, {hi}]"
                )));
            }
        }
        let points = (self.t_max / self.step).ceil() as i64 - (self.t_min / self.step).floor() as i64 + 1;
        if points < 64 {
            return Err(Error::InvalidArgument(format!(
                "grid must have at least 64 points, got {points}"
            )));
        }
        Ok(())
    }

    fn t_range(&self, step: f64) -> (i64, i64) {
        ((self.t_min / step).floor() as i64, (self.t_max / step).ceil() as i64)
    }

    fn u_range(&self, step: f64) -> (i64, i64) {
        ((self.u_min / step).floor() as i64, (self.u_max / step).ceil() as i64)
    }
}

/// Tabulated CDF of S_n = Σ log|X_j| with query-side interpolation state.
#[derive(Debug, Clone)]
pub struct ProductLawTable {
    n: usize,
    lattice: LatticeCdf,
    tangents: Vec<f64>,
    truncation_bounds: (f64, f64),
    error_estimate: f64,
}

impl ProductLawTable {
    /// Factor count n.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid_step(&self) -> f64 {
        self.lattice.step
    }

    pub fn t_min(&self) -> f64 {
        self.lattice.t_min()
    }

    pub fn t_max(&self) -> f64 {
        self.lattice.t_max()
    }

    pub fn len(&self) -> usize {
        self.lattice.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.values.is_empty()
    }

    /// Integration window (u_min, u_max) used for the convolutions.
    pub fn truncation_bounds(&self) -> (f64, f64) {
        self.truncation_bounds
    }

    /// Bound combining truncation tails with a Richardson step-halving
    /// estimate of the quadrature error.
    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    /// Grid points t_i (log-epsilon scale), strictly increasing.
    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let k_lo = self.lattice.k_lo;
        let step = self.lattice.step;
        (0..self.lattice.values.len()).map(move |i| (k_lo + i as i64) as f64 * step)
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.lattice.values
    }

    /// P(S_n < t) by monotone piecewise-cubic interpolation.
    pub fn cdf_at_log(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < self.t_min() || t > self.t_max() {
            return Err(Error::OutOfRange(format!(
                "log eps = {t} outside table range [{}, {}]; rebuild with a wider grid",
                self.t_min(),
                self.t_max()
            )));
        }
        Ok(pchip_eval(
            self.lattice.k_lo,
            self.lattice.step,
            &self.lattice.values,
            &self.tangents,
            t,
        )
        .clamp(0.0, 1.0))
    }

    /// P(∏ |X_j| <= eps), interpolated at t = log eps.
    pub fn small_dev_prob(&self, eps: f64) -> Result<f64> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "eps must be positive, got {eps}"
            )));
        }
        self.cdf_at_log(eps.ln())
    }

    /// Convolve this table with `extra` further log|X| factors, staying on
    /// the table's own grid (lookups beyond the window clamp to 0 / the
    /// edge value, and the incurred slop is folded into the error
    /// estimate).
    pub fn extend(&self, extra: usize) -> ProductLawTable {
        let step = self.lattice.step;
        let (u_lo, u_hi) = (self.truncation_bounds.0, self.truncation_bounds.1);
        let j_lo = (u_lo / step).floor() as i64;
        let j_hi = (u_hi / step).ceil() as i64;
        let mut lattice = self.lattice.clone();
        let mut err = self.error_estimate;
        let density = log_abs_gaussian_density;
        for _ in 0..extra {
            let factor = FactorDensity {
                density: &density,
                j_lo,
                j_hi,
                truncated_mass: factor_truncated_mass(j_lo as f64 * step, j_hi as f64 * step),
            };
            let (next, slop) = convolve_extend(&lattice, &factor);
            lattice = next;
            err += slop + ERROR_FLOOR;
        }
        let tangents = pchip_tangents(&lattice.values, step);
        ProductLawTable {
            n: self.n + extra,
            lattice,
            tangents,
            truncation_bounds: self.truncation_bounds,
            error_estimate: err,
        }
    }
}

/// Mass of the log|X| density outside [u_lo, u_hi]: the left tail is the
/// exact CDF there (itself below (2/√(2π)) e^{u_lo}), the right tail the
/// exact survival.
fn factor_truncated_mass(u_lo: f64, u_hi: f64) -> f64 {
    log_abs_gaussian_cdf(u_lo) + (1.0 - log_abs_gaussian_cdf(u_hi))
}

fn build_lattice(n: usize, step: f64, cfg: &GridConfig) -> (LatticeCdf, f64) {
    let (k_lo, k_hi) = cfg.t_range(step);
    if n == 1 {
        let values = (k_lo..=k_hi)
            .map(|k| log_abs_gaussian_cdf(k as f64 * step))
            .collect();
        let mut lattice = LatticeCdf { k_lo, step, values };
        lattice.enforce_cdf_shape();
        return (lattice, 0.0);
    }
    let (j_lo, j_hi) = cfg.u_range(step);
    let mass = factor_truncated_mass(j_lo as f64 * step, j_hi as f64 * step);
    let density = log_abs_gaussian_density;
    let factors: Vec<FactorDensity> = (0..n - 1)
        .map(|_| FactorDensity {
            density: &density,
            j_lo,
            j_hi,
            truncated_mass: mass,
        })
        .collect();
    convolve_chain(&log_abs_gaussian_cdf, &factors, step, k_lo, k_hi)
}

/// Build the CDF table of S_n = Σ log|X_j| on the configured grid.
///
/// The quadrature error is estimated by rebuilding at twice the step and
/// applying the usual Richardson factor; the truncation tails of each
/// convolution are added on top.
pub fn build_product_law(n: usize, cfg: &GridConfig) -> Result<ProductLawTable> {
    if n == 0 {
        return Err(Error::InvalidArgument("factor count n must be >= 1".into()));
    }
    cfg.validate()?;

    let step = cfg.step;
    let (lattice, truncated) = build_lattice(n, step, cfg);
    let tangents = pchip_tangents(&lattice.values, step);

    // Richardson step-halving estimate, probed through the interpolant so
    // it sees the interpolation error too. Quarter points matter: the
    // leading cubic-Hermite error term is odd about the cell midpoint and
    // vanishes there.
    let quadrature_est = if n == 1 {
        0.0
    } else {
        let (coarse, _) = build_lattice(n, 2.0 * step, cfg);
        let coarse_tangents = pchip_tangents(&coarse.values, 2.0 * step);
        let mut max_gap = 0.0f64;
        for ci in 0..coarse.values.len().saturating_sub(1) {
            let cell = (coarse.k_lo + ci as i64) as f64 * 2.0 * step;
            for offset in [0.5, 1.0, 1.5] {
                let t = cell + offset * step;
                if t >= lattice.t_min() && t <= lattice.t_max() {
                    let fine = pchip_eval(lattice.k_lo, step, &lattice.values, &tangents, t);
                    let rough = pchip_eval(
                        coarse.k_lo,
                        2.0 * step,
                        &coarse.values,
                        &coarse_tangents,
                        t,
                    );
                    max_gap = max_gap.max((fine - rough).abs());
                }
            }
        }
        max_gap / 3.0
    };

    let error_estimate = truncated + quadrature_est + ERROR_FLOOR;
    Ok(ProductLawTable {
        n,
        lattice,
        tangents,
        truncation_bounds: (cfg.u_min, cfg.u_max),
        error_estimate,
    })
}

/// The small-epsilon equivalent of P(∏ |X_j| <= eps):
/// (2/√(2π))^n · eps · |log eps|^{n−1} / (n−1)!.
///
/// Only the asymptotic regime eps < 1 is accepted; how close the formula
/// is to the exact law at a given eps is the caller's concern.
pub fn asymptotic_product_prob(n: usize, eps: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("factor count n must be >= 1".into()));
    }
    if !eps.is_finite() || eps <= 0.0 || eps >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "asymptotic formula requires 0 < eps < 1, got {eps}"
        )));
    }
    let log_eps = eps.ln();
    // assembled in log space so large n or tiny eps cannot overflow
    let mut log_value = n as f64 * TWO_OVER_SQRT_2PI.ln() + log_eps
        + (n as f64 - 1.0) * log_eps.abs().ln();
    for j in 2..n {
        log_value -= (j as f64).ln();
    }
    Ok(log_value.exp())
}

/// Corollary-style bound: rescale eps by the conditional standard
/// deviations, then query the product-law table.
///
/// Returns (eps0, bound) with eps0 = eps / ∏ d_k^{1/2}. Errors when some
/// d_k is zero or when log(eps0) leaves the table.
pub fn corollary_bound(
    eps: f64,
    d: &DValues,
    table: &ProductLawTable,
) -> Result<(f64, f64)> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if d.len() != table.n() {
        return Err(Error::DimensionMismatch(format!(
            "d has {} values but the table was built for n = {}",
            d.len(),
            table.n()
        )));
    }
    let eps0 = d.rescale_eps(eps)?;
    let bound = table.small_dev_prob(eps0)?;
    Ok((eps0, bound))
}

#[cfg(test)]
mod tests {
    // frozen literals keep the oracle's digits even past f64 precision
    #![allow(clippy::excessive_precision)]

    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::rng::substream_rng;

    // Frozen via an independent high-precision quadrature of
    // F_n(t) = ∫ F_{n-1}(t-u) f(u) du with the analytic n=1 base case.
    const F1_LN_01: f64 = 0.079655674554057963;
    const F1_LN_05: f64 = 0.38292492254802621;
    const F2_LN_005: f64 = 0.13090780307125492;
    const F2_LN_1E3: f64 = 0.00510803810410654;
    const F2_LN_1E8: f64 = 1.2437393649547111e-7;
    const F3_LN_01: f64 = 0.3634634523744114;
    const F3_LN_1E3: f64 = 0.017155169013820156;
    const F3_LN_1E8: f64 = 9.8080191080939093e-7;

    fn default_table(n: usize) -> ProductLawTable {
        build_product_law(n, &GridConfig::default()).unwrap()
    }

    #[test]
    fn n1_matches_analytic_cdf() {
        let table = default_table(1);
        assert!((table.small_dev_prob(0.1).unwrap() - F1_LN_01).abs() <= 1e-9);
        assert!((table.small_dev_prob(0.5).unwrap() - F1_LN_05).abs() <= 1e-9);
        // grid values agree with 2 Phi(e^t) - 1 within the table's own
        // error estimate
        let err = table.error_estimate();
        for (t, &cdf) in table.grid().zip(table.cdf_values()) {
            assert!(
                (cdf - log_abs_gaussian_cdf(t)).abs() <= err,
                "t={t}: {cdf} vs analytic"
            );
        }
    }

    #[test]
    fn n2_and_n3_match_independent_quadrature() {
        let t2 = default_table(2);
        for (eps, want) in [(0.05, F2_LN_005), (1e-3, F2_LN_1E3), (1e-8, F2_LN_1E8)] {
            let got = t2.small_dev_prob(eps).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-7);
        }
        let t3 = default_table(3);
        for (eps, want) in [(0.1, F3_LN_01), (1e-3, F3_LN_1E3), (1e-8, F3_LN_1E8)] {
            let got = t3.small_dev_prob(eps).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-6);
        }
    }

    #[test]
    fn n2_matches_monte_carlo() {
        // brute-force sampling oracle: P(|X1 X2| <= 0.05)
        let mut rng = substream_rng(2024, 90, 0);
        let trials = 10_000_000u64;
        let mut hits = 0u64;
        for _ in 0..trials {
            let x1: f64 = rng.sample(StandardNormal);
            let x2: f64 = rng.sample(StandardNormal);
            if (x1 * x2).abs() <= 0.05 {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / trials as f64;
        let table_p = default_table(2).small_dev_prob(0.05).unwrap();
        let se = (table_p * (1.0 - table_p) / trials as f64).sqrt();
        assert!(
            (p_hat - table_p).abs() <= 4.0 * se,
            "MC {p_hat} vs table {table_p} (se {se})"
        );
    }

    #[test]
    fn cdf_edges_and_shape() {
        for n in 1..=4 {
            let table = default_table(n);
            let v = table.cdf_values();
            assert!(v[0] <= table.error_estimate(), "left edge {} for n={n}", v[0]);
            assert!(
                1.0 - v[v.len() - 1] <= table.error_estimate(),
                "right edge {} for n={n}",
                v[v.len() - 1]
            );
            for w in v.windows(2) {
                assert!(w[1] >= w[0]);
            }
            assert!(v.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn convolution_consistency_two_routes() {
        // route A: built directly; route B: n=2 table extended by one factor
        let direct = default_table(3);
        let extended = default_table(2).extend(1);
        assert_eq!(extended.n(), 3);
        let budget = direct.error_estimate() + extended.error_estimate();
        for eps in [1e-6, 1e-3, 0.05, 0.3, 1.5] {
            let a = direct.small_dev_prob(eps).unwrap();
            let b = extended.small_dev_prob(eps).unwrap();
            assert!(
                (a - b).abs() <= budget,
                "routes disagree at eps={eps}: {a} vs {b} (budget {budget})"
            );
        }
    }

    #[test]
    fn asymptotic_spot_values() {
        assert_relative_eq!(
            asymptotic_product_prob(1, 1e-4).unwrap(),
            7.9788456080286536e-5,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            asymptotic_product_prob(2, 1e-4).unwrap(),
            5.8634847910354219e-4,
            max_relative = 1e-13
        );
    }

    #[test]
    fn asymptotic_matches_exact_for_n1_tiny_eps() {
        // 2 Phi(eps) - 1 ~ (2/sqrt(2pi)) eps with relative error eps^2/6
        let eps = 1e-6f64;
        let exact = log_abs_gaussian_cdf(eps.ln());
        let asym = asymptotic_product_prob(1, eps).unwrap();
        assert!((asym / exact - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn asymptotic_rejects_out_of_regime() {
        assert!(asymptotic_product_prob(2, 1.0).is_err());
        assert!(asymptotic_product_prob(2, 1.5).is_err());
        assert!(asymptotic_product_prob(2, 0.0).is_err());
        assert!(asymptotic_product_prob(2, -0.1).is_err());
    }

    #[test]
    fn asymptotic_converges_as_eps_shrinks() {
        for n in [2usize, 3] {
            let table = default_table(n);
            let ratio = |eps: f64| {
                let exact = table.small_dev_prob(eps).unwrap();
                let asym = asymptotic_product_prob(n, eps).unwrap();
                (exact / asym - 1.0).abs()
            };
            let coarse = ratio(1e-3);
            let fine = ratio(1e-8);
            assert!(fine < coarse, "n={n}: {fine} !< {coarse}");
            assert!(fine <= 0.25, "n={n}: ratio gap {fine} at eps=1e-8");
        }
    }

    #[test]
    fn regime_check_n2() {
        let table = default_table(2);
        let exact = table.small_dev_prob(1e-3).unwrap();
        let asym = asymptotic_product_prob(2, 1e-3).unwrap();
        assert!((exact / asym - 1.0).abs() <= 0.25, "{exact} vs {asym}");
    }

    #[test]
    fn halving_the_step_moves_less_than_the_error_estimate() {
        let cfg = GridConfig::default();
        let halved = GridConfig {
            step: cfg.step / 2.0,
            ..cfg
        };
        for n in [2usize, 3] {
            let coarse = build_product_law(n, &cfg).unwrap();
            let fine = build_product_law(n, &halved).unwrap();
            for eps in [1e-8, 1e-3, 0.1, 1.0] {
                let a = coarse.small_dev_prob(eps).unwrap();
                let b = fine.small_dev_prob(eps).unwrap();
                assert!(
                    (a - b).abs() < coarse.error_estimate(),
                    "n={n} eps={eps}: |{a} - {b}| >= {}",
                    coarse.error_estimate()
                );
            }
        }
    }

    #[test]
    fn out_of_range_eps_is_an_explicit_error() {
        let table = default_table(2);
        assert!(matches!(
            table.small_dev_prob(1e-30),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(
            table.small_dev_prob(1e10),
            Err(Error::OutOfRange(_))
        ));
        assert!(table.small_dev_prob(-1.0).is_err());
        // right edge: essentially 1
        let near_one = table.small_dev_prob((5.9f64).exp()).unwrap();
        assert!(near_one > 1.0 - 1e-9);
    }

    #[test]
    fn grid_validation() {
        let cfg = GridConfig {
            t_min: -0.1,
            t_max: 0.1,
            step: 0.01,
            ..GridConfig::default()
        };
        assert!(build_product_law(2, &cfg).is_err(), "fewer than 64 points");
        let cfg = GridConfig {
            step: -0.5,
            ..GridConfig::default()
        };
        assert!(build_product_law(2, &cfg).is_err(), "nonpositive step");
        assert!(build_product_law(0, &GridConfig::default()).is_err());
    }

    #[test]
    fn corollary_rescaling() {
        let table = default_table(2);
        let unit = DValues::from_values(vec![1.0, 1.0]);
        let (eps0, bound) = corollary_bound(0.1, &unit, &table).unwrap();
        assert_eq!(eps0, 0.1);
        assert_relative_eq!(bound, table.small_dev_prob(0.1).unwrap());

        let scaled = DValues::from_values(vec![4.0, 1.0]);
        let (eps0, _) = corollary_bound(0.2, &scaled, &table).unwrap();
        assert_relative_eq!(eps0, 0.1, epsilon = 1e-15);

        let degenerate = DValues::from_values(vec![1.0, 0.0]);
        assert!(matches!(
            corollary_bound(0.1, &degenerate, &table),
            Err(Error::ZeroDValue { index: 2 })
        ));

        let wrong_n = DValues::from_values(vec![1.0; 3]);
        assert!(corollary_bound(0.1, &wrong_n, &table).is_err());
    }
}

//! Trapezoid convolution of a CDF with log-scale densities on a shared
//! uniform lattice, plus the monotone cubic interpolation used to query
//! the resulting tables.
//!
//! Everything lives on the lattice {k * step : k integer}. Keeping the CDF
//! grid and the integration grid on one lattice makes every convolution
//! lookup land exactly on a tabulated point, so no interpolation error
//! enters the recursion. The integrands decay to zero at both truncation
//! ends (like e^u on the left, double-exponentially on the right), which is
//! the regime where the uniform trapezoid rule converges spectrally.

/// One convolution factor: its log-density sampled on `j_lo..=j_hi` of the
/// lattice, and the probability mass lying outside that window.
pub(crate) struct FactorDensity<'a> {
    pub density: &'a dyn Fn(f64) -> f64,
    pub j_lo: i64,
    pub j_hi: i64,
    pub truncated_mass: f64,
}

/// CDF values on a contiguous lattice window.
#[derive(Debug, Clone)]
pub(crate) struct LatticeCdf {
    pub k_lo: i64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl LatticeCdf {
    pub fn k_hi(&self) -> i64 {
        self.k_lo + self.values.len() as i64 - 1
    }

    pub fn t_min(&self) -> f64 {
        self.k_lo as f64 * self.step
    }

    pub fn t_max(&self) -> f64 {
        self.k_hi() as f64 * self.step
    }

    fn get(&self, k: i64) -> f64 {
        debug_assert!(k >= self.k_lo && k <= self.k_hi());
        self.values[(k - self.k_lo) as usize]
    }

    /// Lookup with the monotone-CDF clamp: 0 below the window, the last
    /// (largest) value above it.
    fn get_clamped(&self, k: i64) -> f64 {
        if k < self.k_lo {
            0.0
        } else if k > self.k_hi() {
            *self.values.last().expect("nonempty lattice")
        } else {
            self.values[(k - self.k_lo) as usize]
        }
    }

    /// Bring roundoff back inside the CDF shape: clamp to [0,1] and make
    /// the sequence nondecreasing.
    pub fn enforce_cdf_shape(&mut self) {
        let mut running = 0.0f64;
        for v in self.values.iter_mut() {
            running = running.max(v.clamp(0.0, 1.0));
            *v = running;
        }
    }
}

/// F_out(k h) = sum_j w_j f(j h) F_base((k - j) h) h  (trapezoid weights).
///
/// `clamped` selects the base lookup: the exact interior lookup panics in
/// debug builds when the base window is too narrow; the clamped lookup
/// substitutes 0 / last-value outside the window.
fn convolve_once(
    base: &LatticeCdf,
    factor: &FactorDensity,
    out_k_lo: i64,
    out_len: usize,
    clamped: bool,
) -> LatticeCdf {
    let step = base.step;
    let mut dens: Vec<f64> = (factor.j_lo..=factor.j_hi)
        .map(|j| (factor.density)(j as f64 * step))
        .collect();
    if let Some(first) = dens.first_mut() {
        *first *= 0.5;
    }
    if let Some(last) = dens.last_mut() {
        *last *= 0.5;
    }

    let mut values = vec![0.0; out_len];
    for (i, out) in values.iter_mut().enumerate() {
        let k = out_k_lo + i as i64;
        let mut acc = 0.0;
        if clamped {
            for (j, d) in dens.iter().enumerate() {
                acc += d * base.get_clamped(k - factor.j_lo - j as i64);
            }
        } else {
            for (j, d) in dens.iter().enumerate() {
                acc += d * base.get(k - factor.j_lo - j as i64);
            }
        }
        *out = acc * step;
    }
    LatticeCdf {
        k_lo: out_k_lo,
        step,
        values,
    }
}

/// Convolve an analytic base CDF with a chain of factor densities, keeping
/// every intermediate table wide enough that no lookup ever leaves it.
///
/// Returns the final lattice on `out_k_lo..=out_k_hi` and the total
/// truncated factor mass.
pub(crate) fn convolve_chain(
    base_cdf: &dyn Fn(f64) -> f64,
    factors: &[FactorDensity],
    step: f64,
    out_k_lo: i64,
    out_k_hi: i64,
) -> (LatticeCdf, f64) {
    // range needed after l factors applied; ranges[factors.len()] = requested
    let mut ranges = vec![(out_k_lo, out_k_hi); factors.len() + 1];
    for l in (0..factors.len()).rev() {
        let next = ranges[l + 1];
        ranges[l] = (next.0 - factors[l].j_hi, next.1 - factors[l].j_lo);
    }

    let (k_lo, k_hi) = ranges[0];
    let mut cur = LatticeCdf {
        k_lo,
        step,
        values: (k_lo..=k_hi).map(|k| base_cdf(k as f64 * step)).collect(),
    };
    let mut truncated = 0.0;
    for (l, factor) in factors.iter().enumerate() {
        let (nk_lo, nk_hi) = ranges[l + 1];
        cur = convolve_once(&cur, factor, nk_lo, (nk_hi - nk_lo + 1) as usize, false);
        truncated += factor.truncated_mass;
    }
    cur.enforce_cdf_shape();
    (cur, truncated)
}

/// Convolve a finalized table with one more factor on the table's own
/// window, clamping lookups that fall outside it. Returns the new lattice
/// plus the clamp slop bound (mass that may have been mis-assigned at the
/// window edges).
pub(crate) fn convolve_extend(base: &LatticeCdf, factor: &FactorDensity) -> (LatticeCdf, f64) {
    let mut out = convolve_once(base, factor, base.k_lo, base.values.len(), true);
    out.enforce_cdf_shape();
    let slop = base.values.first().copied().unwrap_or(0.0)
        + (1.0 - base.values.last().copied().unwrap_or(1.0));
    (out, slop + factor.truncated_mass)
}

/// Fritsch–Carlson tangents for a monotone piecewise-cubic Hermite
/// interpolant on a uniform grid. Monotone data stays monotone.
pub(crate) fn pchip_tangents(values: &[f64], step: f64) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let secant = |i: usize| (values[i + 1] - values[i]) / step;
    let mut m = vec![0.0; n];
    m[0] = secant(0);
    m[n - 1] = secant(n - 2);
    for (i, slot) in m.iter_mut().enumerate().take(n - 1).skip(1) {
        let d0 = secant(i - 1);
        let d1 = secant(i);
        *slot = if d0 * d1 <= 0.0 { 0.0 } else { 0.5 * (d0 + d1) };
    }
    // limit tangents so each interval's Hermite piece is monotone
    for i in 0..n - 1 {
        let d = secant(i);
        if d == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let alpha = m[i] / d;
        let beta = m[i + 1] / d;
        let norm2 = alpha * alpha + beta * beta;
        if norm2 > 9.0 {
            let tau = 3.0 / norm2.sqrt();
            m[i] = tau * alpha * d;
            m[i + 1] = tau * beta * d;
        }
    }
    m
}

/// Evaluate the Hermite piece containing `t`; `t` must lie within the grid.
pub(crate) fn pchip_eval(k_lo: i64, step: f64, values: &[f64], tangents: &[f64], t: f64) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    let x = t / step - k_lo as f64;
    let i = (x.floor() as usize).min(n - 2);
    let s = (x - i as f64).clamp(0.0, 1.0);
    let (y0, y1) = (values[i], values[i + 1]);
    let (m0, m1) = (tangents[i] * step, tangents[i + 1] * step);
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
}

//! Seeded, parallelizable, mergeable Monte Carlo estimation of
//! determinant small-deviation probabilities, with exact binomial
//! confidence intervals and a Kolmogorov–Smirnov fit helper.
//!
//! Trials are keyed individually: trial t always consumes the substream
//! `(base_seed, MC_TRIAL, t)`, so hit counts are identical for any worker
//! count and any contiguous split of the trial range, and split runs merge
//! exactly.

use statrs::distribution::{Beta, ContinuousCDF};

use crate::conditioning::compute_d_values;
use crate::covariance::CovarianceSpec;
use crate::det::{gram_det, lu_log_abs_det};
use crate::error::{Error, Result};
use crate::ordering::build_ordering;
use crate::rng::{streams, substream_rng};
use crate::sampling::MatrixSampler;
use crate::scalar::{build_product_law, GridConfig};

/// Which determinant statistic the event refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetEvent {
    /// |det M| <= eps for the square n×n matrix (requires m = n).
    SquareAbsDet,
    /// sqrt(det A Aᵀ) < eps for the n×m matrix.
    GramSqrtDet,
}

impl DetEvent {
    pub fn token(self) -> &'static str {
        match self {
            DetEvent::SquareAbsDet => "square-abs-det",
            DetEvent::GramSqrtDet => "gram-sqrt-det",
        }
    }
}

/// Everything that identifies an experiment; two estimates merge only if
/// their descriptors hash identically.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: CovarianceSpec,
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub event: DetEvent,
}

impl Experiment {
    pub fn descriptor(&self) -> String {
        format!(
            "spec={};n={};m={};eps={:.16e};event={}",
            self.spec.descriptor(),
            self.n,
            self.m,
            self.eps,
            self.event.token()
        )
    }

    /// First 16 hex digits of the SHA-256 of the descriptor.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.descriptor().as_bytes());
        let mut out = String::with_capacity(16);
        for b in &digest[..8] {
            use std::fmt::Write as _;
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

/// Base seed plus the trial ranges an estimate covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McSeedRecord {
    pub base_seed: u64,
    /// Disjoint, sorted (start, count) ranges of trial indices.
    pub ranges: Vec<(u64, u64)>,
}

/// Binomial estimate with an exact Clopper–Pearson interval.
#[derive(Debug, Clone)]
pub struct MonteCarloEstimate {
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub seed_record: McSeedRecord,
    pub descriptor_hash: String,
}

/// Exact two-sided Clopper–Pearson interval; valid at zero (and full)
/// hit counts.
pub fn clopper_pearson(hits: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || hits > trials {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= hits <= trials with trials >= 1, got {hits}/{trials}"
        )));
    }
    if !confidence.is_finite() || confidence <= 0.0 || confidence >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "confidence must lie in (0,1), got {confidence}"
        )));
    }
    let alpha = 1.0 - confidence;
    let (h, t) = (hits as f64, trials as f64);
    let low = if hits == 0 {
        0.0
    } else {
        Beta::new(h, t - h + 1.0)
            .expect("valid Beta parameters")
            .inverse_cdf(alpha / 2.0)
    };
    let high = if hits == trials {
        1.0
    } else {
        Beta::new(h + 1.0, t - h)
            .expect("valid Beta parameters")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    Ok((low.clamp(0.0, 1.0), high.clamp(0.0, 1.0)))
}

impl MonteCarloEstimate {
    fn from_counts(
        hits: u64,
        trials: u64,
        confidence: f64,
        seed_record: McSeedRecord,
        descriptor_hash: String,
    ) -> Result<Self> {
        if trials == 0 {
            // merge identity: no information, vacuous interval
            return Ok(MonteCarloEstimate {
                hits: 0,
                trials: 0,
                p_hat: 0.0,
                ci_low: 0.0,
                ci_high: 1.0,
                confidence,
                seed_record,
                descriptor_hash,
            });
        }
        let (ci_low, ci_high) = clopper_pearson(hits, trials, confidence)?;
        let p_hat = hits as f64 / trials as f64;
        Ok(MonteCarloEstimate {
            hits,
            trials,
            p_hat,
            ci_low: ci_low.min(p_hat),
            ci_high: ci_high.max(p_hat),
            confidence,
            seed_record,
            descriptor_hash,
        })
    }

    /// Zero-trial identity element for `merge`.
    pub fn empty(experiment: &Experiment, base_seed: u64, confidence: f64) -> Self {
        Self::from_counts(
            0,
            0,
            confidence,
            McSeedRecord {
                base_seed,
                ranges: Vec::new(),
            },
            experiment.hash(),
        )
        .expect("zero-trial construction is infallible")
    }

    /// Pool two estimates of the same experiment: counts add, the interval
    /// is recomputed. Associative and commutative on (hits, trials).
    pub fn merge(&self, other: &MonteCarloEstimate) -> Result<MonteCarloEstimate> {
        if self.descriptor_hash != other.descriptor_hash {
            return Err(Error::IncompatibleEstimates(format!(
                "descriptor {} vs {}",
                self.descriptor_hash, other.descriptor_hash
            )));
        }
        if self.seed_record.base_seed != other.seed_record.base_seed {
            return Err(Error::IncompatibleEstimates(
                "estimates use different base seeds".into(),
            ));
        }
        if self.confidence != other.confidence {
            return Err(Error::IncompatibleEstimates(
                "estimates use different confidence levels".into(),
            ));
        }
        let mut ranges = self.seed_record.ranges.clone();
        ranges.extend_from_slice(&other.seed_record.ranges);
        ranges.sort_unstable();
        for w in ranges.windows(2) {
            let (s0, c0) = w[0];
            let (s1, _) = w[1];
            if s0 + c0 > s1 {
                return Err(Error::IncompatibleEstimates(format!(
                    "trial ranges overlap: ({s0},{c0}) and ({s1},..)"
                )));
            }
        }
        MonteCarloEstimate::from_counts(
            self.hits + other.hits,
            self.trials + other.trials,
            self.confidence,
            McSeedRecord {
                base_seed: self.seed_record.base_seed,
                ranges: coalesce(ranges),
            },
            self.descriptor_hash.clone(),
        )
    }
}

fn coalesce(sorted: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(sorted.len());
    for (s, c) in sorted {
        match out.last_mut() {
            Some((ps, pc)) if *ps + *pc == s => *pc += c,
            _ => out.push((s, c)),
        }
    }
    out
}

/// Trial budget and parallelism for one estimation run.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub trials: u64,
    pub base_seed: u64,
    pub workers: usize,
    pub confidence: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            trials: 100_000,
            base_seed: 0,
            workers: 1,
            confidence: 0.99,
        }
    }
}

/// Estimate P(event at eps) over trials [0, cfg.trials).
pub fn estimate_det_small_dev(
    spec: &CovarianceSpec,
    n: usize,
    m: usize,
    event: DetEvent,
    eps: f64,
    cfg: &McConfig,
) -> Result<MonteCarloEstimate> {
    estimate_det_small_dev_range(spec, n, m, event, eps, cfg, 0, cfg.trials)
}

/// Range variant: estimate over trials [start, start + count); two runs
/// covering disjoint ranges of the same experiment merge into exactly the
/// run that covers their union.
#[allow(clippy::too_many_arguments)]
pub fn estimate_det_small_dev_range(
    spec: &CovarianceSpec,
    n: usize,
    m: usize,
    event: DetEvent,
    eps: f64,
    cfg: &McConfig,
    start: u64,
    count: u64,
) -> Result<MonteCarloEstimate> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("trial count must be >= 1".into()));
    }
    if event == DetEvent::SquareAbsDet && n != m {
        return Err(Error::DimensionMismatch(format!(
            "the square statistic requires m = n, got n={n}, m={m}"
        )));
    }
    let workers = cfg.workers.max(1);
    let ordering = build_ordering(n, m)?;
    let sampler = MatrixSampler::new(spec, ordering)?;
    let log_eps = eps.ln();

    let hits = if workers == 1 {
        count_hits(&sampler, event, log_eps, cfg.base_seed, start, count)
    } else {
        let chunk = count / workers as u64;
        let rem = count % workers as u64;
        std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(workers);
            let mut offset = start;
            for w in 0..workers as u64 {
                let len = chunk + u64::from(w < rem);
                if len == 0 {
                    continue;
                }
                let sampler = &sampler;
                let begin = offset;
                handles.push(scope.spawn(move || {
                    count_hits(sampler, event, log_eps, cfg.base_seed, begin, len)
                }));
                offset += len;
            }
            handles.into_iter().map(|h| h.join().expect("worker panicked")).sum()
        })
    };

    let experiment = Experiment {
        spec: spec.clone(),
        n,
        m,
        eps,
        event,
    };
    MonteCarloEstimate::from_counts(
        hits,
        count,
        cfg.confidence,
        McSeedRecord {
            base_seed: cfg.base_seed,
            ranges: vec![(start, count)],
        },
        experiment.hash(),
    )
}

/// Count indicator events over one contiguous trial range. The comparison
/// is done in log magnitude, so epsilons far below underflow still work.
fn count_hits(
    sampler: &MatrixSampler,
    event: DetEvent,
    log_eps: f64,
    base_seed: u64,
    start: u64,
    count: u64,
) -> u64 {
    let n = sampler.ordering().n();
    let m = sampler.ordering().m();
    let mut entries = vec![0.0; n * m];
    let mut lu_buf = vec![0.0; n * n];
    let mut gram_buf = vec![0.0; n * n];
    let mut z = vec![0.0; sampler.rank()];
    let mut hits = 0u64;
    for trial in start..start + count {
        let mut rng = substream_rng(base_seed, streams::MC_TRIAL, trial);
        sampler.sample_entries_into(&mut rng, &mut z, &mut entries);
        let hit = match event {
            DetEvent::SquareAbsDet => {
                lu_buf.copy_from_slice(&entries);
                let (_, log_abs) = lu_log_abs_det(&mut lu_buf, n);
                log_abs <= log_eps
            }
            DetEvent::GramSqrtDet => {
                match crate::det::gram_log_det_cholesky(&entries, n, m, &mut gram_buf) {
                    Some(log_det) => 0.5 * log_det < log_eps,
                    None => {
                        // degenerate Gram: fall back to the full routine
                        let a = nalgebra::DMatrix::from_fn(n, m, |r, c| entries[r * m + c]);
                        let res = gram_det(&a).expect("dimensions already validated");
                        0.5 * res.log_abs_det < log_eps
                    }
                }
            }
        };
        hits += u64::from(hit);
    }
    hits
}

/// Supremum distance between an empirical CDF and a reference CDF.
#[derive(Debug, Clone, Copy)]
pub struct KSResult {
    pub statistic: f64,
    pub sample_size: usize,
    /// Tail probability of the asymptotic Kolmogorov distribution at
    /// sqrt(N) * statistic.
    pub p_value_bound: f64,
}

/// Kolmogorov–Smirnov fit of sorted samples against a reference CDF.
pub fn ks_fit<F: Fn(f64) -> f64>(samples: &[f64], law_cdf: F) -> Result<KSResult> {
    if samples.len() < 100 {
        return Err(Error::InvalidArgument(format!(
            "ks_fit needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    if samples.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("samples must be sorted".into()));
    }
    let n = samples.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = law_cdf(x);
        sup = sup.max((f - i as f64 / n).abs());
        sup = sup.max(((i + 1) as f64 / n - f).abs());
    }
    Ok(KSResult {
        statistic: sup,
        sample_size: samples.len(),
        p_value_bound: kolmogorov_sf(n.sqrt() * sup),
    })
}

/// Survival function Q(λ) of the asymptotic Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form converges fast for small lambda
        let factor = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let q = (-std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda)).exp();
        let mut cdf = 0.0;
        let mut k = 1u32;
        loop {
            let term = q.powi(((2 * k - 1) * (2 * k - 1)) as i32);
            cdf += term;
            if term < 1e-17 * cdf.max(1e-300) || k > 50 {
                break;
            }
            k += 1;
        }
        (1.0 - factor * cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        let mut sign = 1.0;
        for k in 1..=50 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            sf += sign * term;
            sign = -sign;
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// One line of a bound-check report; fields mirror the CSV columns.
#[derive(Debug, Clone)]
pub struct BoundCheckRow {
    pub eps: f64,
    pub n: usize,
    pub m: usize,
    pub spec_hash: String,
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: f64,
    /// true iff ci_low <= bound (no slack: the bound must hold up to
    /// Monte Carlo error).
    pub verdict: bool,
}

/// Full verification pipeline for one spec: conditional variances, the
/// product-law table, a Monte Carlo estimate per epsilon, and the verdict
/// `ci_low <= bound`.
///
/// The bound is always evaluated at the rescaled eps0 = eps / ∏ d_k^{1/2};
/// for unit-residual specs (the theorem's normalization) eps0 = eps.
pub fn bound_check(
    spec: &CovarianceSpec,
    n: usize,
    m: usize,
    event: DetEvent,
    eps_list: &[f64],
    grid: &GridConfig,
    cfg: &McConfig,
) -> Result<Vec<BoundCheckRow>> {
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("need at least one eps".into()));
    }
    let d = compute_d_values(spec, n, m)?;
    let table = build_product_law(n, grid)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let eps0 = d.rescale_eps(eps)?;
        let bound = table.small_dev_prob(eps0)?;
        let est = estimate_det_small_dev(spec, n, m, event, eps, cfg)?;
        rows.push(BoundCheckRow {
            eps,
            n,
            m,
            spec_hash: est.descriptor_hash.clone(),
            trials: est.trials,
            hits: est.hits,
            p_hat: est.p_hat,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            bound,
            verdict: est.ci_low <= bound,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::gaussian::abs_normal_cdf;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn iid_estimate(n: usize, eps: f64, trials: u64, seed: u64) -> MonteCarloEstimate {
        estimate_det_small_dev(
            &CovarianceSpec::Iid,
            n,
            n,
            DetEvent::SquareAbsDet,
            eps,
            &McConfig {
                trials,
                base_seed: seed,
                workers: 1,
                confidence: 0.99,
            },
        )
        .unwrap()
    }

    #[test]
    fn n1_covers_the_analytic_law() {
        let est = iid_estimate(1, 0.1, 1_000_000, 71);
        let truth = abs_normal_cdf(0.1);
        assert!(
            est.ci_low <= truth && truth <= est.ci_high,
            "CI [{}, {}] misses {truth}",
            est.ci_low,
            est.ci_high
        );
        assert_relative_eq!(est.p_hat, truth, max_relative = 0.05);
    }

    #[test]
    fn zero_hits_still_has_a_positive_upper_bound() {
        // eps so small that nothing hits
        let est = iid_estimate(2, 1e-300, 10_000, 5);
        assert_eq!(est.hits, 0);
        assert_eq!(est.p_hat, 0.0);
        assert_eq!(est.ci_low, 0.0);
        // exact bound: 1 - (alpha/2)^{1/n}
        let expect = 1.0 - (0.005f64).powf(1.0 / 10_000.0);
        assert!(est.ci_high > 0.0);
        assert_relative_eq!(est.ci_high, expect, max_relative = 1e-4);
    }

    #[test]
    fn determinism_across_worker_counts() {
        let base = iid_estimate(2, 0.1, 40_000, 13);
        for workers in [2usize, 3, 8] {
            let est = estimate_det_small_dev(
                &CovarianceSpec::Iid,
                2,
                2,
                DetEvent::SquareAbsDet,
                0.1,
                &McConfig {
                    trials: 40_000,
                    base_seed: 13,
                    workers,
                    confidence: 0.99,
                },
            )
            .unwrap();
            assert_eq!(est.hits, base.hits, "workers = {workers}");
        }
    }

    #[test]
    fn split_runs_merge_into_the_full_run() {
        let cfg = McConfig {
            trials: 30_000,
            base_seed: 21,
            workers: 2,
            confidence: 0.99,
        };
        let full = estimate_det_small_dev(
            &CovarianceSpec::Iid,
            2,
            2,
            DetEvent::SquareAbsDet,
            0.1,
            &cfg,
        )
        .unwrap();
        let a = estimate_det_small_dev_range(
            &CovarianceSpec::Iid,
            2,
            2,
            DetEvent::SquareAbsDet,
            0.1,
            &cfg,
            0,
            15_000,
        )
        .unwrap();
        let b = estimate_det_small_dev_range(
            &CovarianceSpec::Iid,
            2,
            2,
            DetEvent::SquareAbsDet,
            0.1,
            &cfg,
            15_000,
            15_000,
        )
        .unwrap();
        let merged = a.merge(&b).unwrap();
        assert_eq!(merged.hits, full.hits);
        assert_eq!(merged.trials, full.trials);
        assert_eq!(merged.seed_record.ranges, vec![(0, 30_000)]);

        // commutative on counts
        let merged_rev = b.merge(&a).unwrap();
        assert_eq!(merged_rev.hits, merged.hits);
        assert_eq!(merged_rev.trials, merged.trials);

        // overlapping ranges are rejected
        assert!(a.merge(&a).is_err());
    }

    #[test]
    fn merging_the_empty_estimate_is_identity() {
        let est = iid_estimate(2, 0.1, 5_000, 3);
        let experiment = Experiment {
            spec: CovarianceSpec::Iid,
            n: 2,
            m: 2,
            eps: 0.1,
            event: DetEvent::SquareAbsDet,
        };
        let empty = MonteCarloEstimate::empty(&experiment, 3, 0.99);
        let merged = est.merge(&empty).unwrap();
        assert_eq!(merged.hits, est.hits);
        assert_eq!(merged.trials, est.trials);
        assert_eq!(merged.ci_low, est.ci_low);
        assert_eq!(merged.seed_record, est.seed_record);
    }

    #[test]
    fn merge_rejects_different_experiments() {
        let a = iid_estimate(2, 0.1, 1_000, 3);
        let b = iid_estimate(2, 0.2, 1_000, 3);
        assert!(matches!(
            a.merge(&b),
            Err(Error::IncompatibleEstimates(_))
        ));
    }

    #[test]
    fn merge_associative_on_counts() {
        let cfg = McConfig {
            trials: 0,
            base_seed: 77,
            workers: 1,
            confidence: 0.99,
        };
        let mk = |start: u64| {
            estimate_det_small_dev_range(
                &CovarianceSpec::Iid,
                2,
                2,
                DetEvent::SquareAbsDet,
                0.15,
                &cfg,
                start,
                5_000,
            )
            .unwrap()
        };
        let (a, b, c) = (mk(0), mk(5_000), mk(10_000));
        let left = a.merge(&b).unwrap().merge(&c).unwrap();
        let right = a.merge(&b.merge(&c).unwrap()).unwrap();
        assert_eq!(left.hits, right.hits);
        assert_eq!(left.trials, right.trials);
        assert_eq!(left.seed_record, right.seed_record);
    }

    #[test]
    fn clopper_pearson_calibration() {
        // 99% interval for a p = 0.05 Bernoulli stream must cover p in at
        // least 985 of 1000 seeded repetitions
        let p = 0.05;
        let reps = 1000;
        let trials_per_rep = 1500u64;
        let mut covered = 0;
        for rep in 0..reps {
            let mut rng = substream_rng(88, 7, rep);
            let hits = (0..trials_per_rep)
                .filter(|_| rng.random::<f64>() < p)
                .count() as u64;
            let (lo, hi) = clopper_pearson(hits, trials_per_rep, 0.99).unwrap();
            if lo <= p && p <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 985, "covered {covered}/1000");
    }

    #[test]
    fn ks_fit_validates_input() {
        let short = vec![0.5; 10];
        assert!(ks_fit(&short, |x| x).is_err());
        let unsorted: Vec<f64> = (0..200).map(|i| ((i * 7919) % 200) as f64).collect();
        assert!(ks_fit(&unsorted, |x| x / 200.0).is_err());
    }

    #[test]
    fn ks_fit_is_pure() {
        let samples: Vec<f64> = (1..=500).map(|i| i as f64 / 500.0).collect();
        let a = ks_fit(&samples, |x| x.clamp(0.0, 1.0)).unwrap();
        let b = ks_fit(&samples, |x| x.clamp(0.0, 1.0)).unwrap();
        assert_eq!(a.statistic, b.statistic);
        assert_eq!(a.p_value_bound, b.p_value_bound);
    }

    #[test]
    fn ks_self_consistency_and_power() {
        // samples from the law itself: p > 0.01 in >= 95 of 100 seeded reps
        let spec = crate::scalar::GammaProductSpec::new(vec![1.0], 1.0).unwrap();
        let mut ok = 0;
        for rep in 0..100u64 {
            let mut draws: Vec<f64> = (0..2_000)
                .map(|i| spec.sample_indexed(500 + rep, i))
                .collect();
            draws.sort_by(f64::total_cmp);
            let ks = ks_fit(&draws, |x: f64| {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-x).exp()
                }
            })
            .unwrap();
            if ks.p_value_bound > 0.01 {
                ok += 1;
            }
        }
        assert!(ok >= 95, "self-consistency held in only {ok}/100 reps");

        // a shifted law must be rejected decisively at N = 100_000
        let mut draws: Vec<f64> = (0..100_000).map(|i| spec.sample_indexed(9, i)).collect();
        draws.sort_by(f64::total_cmp);
        let ks = ks_fit(&draws, |x: f64| {
            if x <= 0.1 {
                0.0
            } else {
                1.0 - (0.1 - x).exp()
            }
        })
        .unwrap();
        assert!(ks.p_value_bound < 0.01, "p = {}", ks.p_value_bound);
    }

    #[test]
    fn kolmogorov_sf_reference_points() {
        // classical table: Q(0.8276) ~ 0.5, Q(1.2238) ~ 0.1, Q(1.6276) ~ 0.01
        assert!((kolmogorov_sf(0.82757) - 0.5).abs() < 5e-4);
        assert!((kolmogorov_sf(1.22385) - 0.1).abs() < 5e-4);
        assert!((kolmogorov_sf(1.62762) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(4.0) < 1e-12);
    }

    #[test]
    fn bound_check_iid_two_by_two() {
        let rows = bound_check(
            &CovarianceSpec::Iid,
            2,
            2,
            DetEvent::SquareAbsDet,
            &[0.2, 0.1, 0.05],
            &GridConfig::default(),
            &McConfig {
                trials: 200_000,
                base_seed: 404,
                workers: 1,
                confidence: 0.99,
            },
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert!(row.verdict, "bound violated at eps = {}", row.eps);
            assert!(row.ci_low <= row.bound);
        }
    }

    #[test]
    fn bound_check_gram_event() {
        let rows = bound_check(
            &CovarianceSpec::Iid,
            2,
            3,
            DetEvent::GramSqrtDet,
            &[0.1],
            &GridConfig::default(),
            &McConfig {
                trials: 100_000,
                base_seed: 640,
                workers: 2,
                confidence: 0.99,
            },
        )
        .unwrap();
        assert!(rows[0].verdict);
    }

    #[test]
    fn corollary_bound_dominates_gram_simulation() {
        // iid 2x2: bound at eps0 = eps (unit residuals) must sit above the
        // simulated P(sqrt(det AA^T) < eps) up to 3 standard errors
        let table = crate::scalar::build_product_law(2, &GridConfig::default()).unwrap();
        let d = compute_d_values(&CovarianceSpec::Iid, 2, 2).unwrap();
        let (eps0, bound) = crate::scalar::corollary_bound(0.05, &d, &table).unwrap();
        assert_eq!(eps0, 0.05);
        let est = estimate_det_small_dev(
            &CovarianceSpec::Iid,
            2,
            2,
            DetEvent::GramSqrtDet,
            0.05,
            &McConfig {
                trials: 400_000,
                base_seed: 2_718,
                workers: 1,
                confidence: 0.99,
            },
        )
        .unwrap();
        let se = (est.p_hat * (1.0 - est.p_hat) / est.trials as f64).sqrt();
        assert!(
            bound >= est.p_hat - 3.0 * se,
            "bound {bound} below simulation {} - 3se",
            est.p_hat
        );
    }

    #[test]
    fn bound_check_rejects_out_of_range_eps() {
        let err = bound_check(
            &CovarianceSpec::Iid,
            2,
            2,
            DetEvent::SquareAbsDet,
            &[1e-30],
            &GridConfig::default(),
            &McConfig {
                trials: 100,
                base_seed: 1,
                workers: 1,
                confidence: 0.99,
            },
        );
        assert!(matches!(err, Err(Error::OutOfRange(_))));
    }

    #[test]
    fn bound_check_propagates_zero_residual() {
        let dense = crate::covariance::DenseCovariance::parse(
            "2 2 4\n1 1\n1 2\n2 1\n2 2\n1 0 0 1\n0 1 0 0\n0 0 1 0\n1 0 0 1\n",
            "inline",
        )
        .unwrap();
        let err = bound_check(
            &CovarianceSpec::Dense(dense),
            2,
            2,
            DetEvent::GramSqrtDet,
            &[0.1],
            &GridConfig::default(),
            &McConfig::default(),
        );
        assert!(matches!(err, Err(Error::ZeroDValue { index: 2 })));
    }

    #[test]
    fn square_event_requires_square_dimensions() {
        let err = estimate_det_small_dev(
            &CovarianceSpec::Iid,
            2,
            3,
            DetEvent::SquareAbsDet,
            0.1,
            &McConfig::default(),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
        assert!(estimate_det_small_dev(
            &CovarianceSpec::Iid,
            2,
            2,
            DetEvent::SquareAbsDet,
            -0.5,
            &McConfig::default(),
        )
        .is_err());
    }
}

//! Closed-form computation-load bounds and the exact FRC failure
//! probability.
//!
//! All logarithms are natural: the headline ratios are base-invariant,
//! and a fixed base makes standalone quantities (batch size, load) well
//! defined. Lower bounds are floored at 1 — a worker must store at least
//! one partition.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schemes::{BrcConfig, DegreeDistribution};

fn check_n_s(n: usize, s: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("need n >= 2, got {n}")));
    }
    if s >= n {
        return Err(Error::invalid(format!("need s < n, got s = {s}, n = {n}")));
    }
    Ok(s as f64 / n as f64)
}

/// Minimum computation load for exact recovery with high probability:
/// `max(1, ln(n ln^2(1/delta) / ln^2 n) / ln(1/delta))` with
/// `delta = s/n`. Returns 1 for `s = 0` (nothing to resist).
pub fn lb_exact(n: usize, s: usize) -> Result<f64> {
    let delta = check_n_s(n, s)?;
    if s == 0 {
        return Ok(1.0);
    }
    let ld = (1.0 / delta).ln();
    let ln_n = (n as f64).ln();
    let raw = (n as f64 * ld * ld / (ln_n * ln_n)).ln() / ld;
    Ok(raw.max(1.0))
}

/// Minimum computation load when an error of `eps * n` is tolerated:
/// `max(1, ln(n ln^2(1/delta) / ((2 eps n + 4) ln^2 n)) / ln(1/delta))`.
///
/// The derivation assumes `eps` below order `1/ln^2 n`; larger values are
/// still evaluated — callers can label them with [`in_regime`].
pub fn lb_eps(n: usize, s: usize, epsilon: f64) -> Result<f64> {
    Ok(lb_eps_unclamped(n, s, epsilon)?.max(1.0))
}

/// The `lb_eps` formula value before flooring at 1, for reporting.
pub fn lb_eps_unclamped(n: usize, s: usize, epsilon: f64) -> Result<f64> {
    let delta = check_n_s(n, s)?;
    if epsilon < 0.0 {
        return Err(Error::domain(format!("need eps >= 0, got {epsilon}")));
    }
    if s == 0 {
        return Ok(1.0);
    }
    let ld = (1.0 / delta).ln();
    let ln_n = (n as f64).ln();
    let raw = (n as f64 * ld * ld / ((2.0 * epsilon * n as f64 + 4.0) * ln_n * ln_n)).ln() / ld;
    Ok(raw)
}

/// Whether `eps` lies in the regime the `lb_eps` derivation covers,
/// taken as `eps < 1 / ln^2 n` (unit constant).
pub fn in_regime(n: usize, epsilon: f64) -> bool {
    let ln_n = (n as f64).ln();
    epsilon < 1.0 / (ln_n * ln_n)
}

/// FRC replication degree sufficient for vanishing failure probability:
/// `ceil(max(1, ln(n ln(1/delta)) / ln(1/delta)))`. The formula value is
/// real; the constructed code needs an integer, and ceiling preserves the
/// sufficiency direction.
pub fn frc_load(n: usize, s: usize) -> Result<usize> {
    let delta = check_n_s(n, s)?;
    if s == 0 {
        return Ok(1);
    }
    let ld = (1.0 / delta).ln();
    let raw = (n as f64 * ld).ln() / ld;
    Ok(raw.max(1.0).ceil() as usize)
}

/// Expected BRC row support and the order-level load term.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BrcLoadSummary {
    /// Analytic average row support `b * E[degree]`.
    pub expected_load: f64,
    /// `ln(1/eps) / ln(1/delta)`, the order-level statement.
    pub order_term: f64,
    pub batch_size: usize,
    pub mean_degree: f64,
}

/// Average computation load of the batch raptor construction at
/// `delta = s/n`.
pub fn brc_load(n: usize, s: usize, epsilon: f64) -> Result<BrcLoadSummary> {
    let delta = check_n_s(n, s)?;
    if s == 0 {
        return Err(Error::domain("BRC load needs s >= 1 (delta > 0)"));
    }
    let cfg = BrcConfig::new(n, delta, epsilon)?;
    let dist = DegreeDistribution::new(epsilon)?;
    let mean_degree = dist.mean();
    Ok(BrcLoadSummary {
        expected_load: cfg.batch_size as f64 * mean_degree,
        order_term: (1.0 / epsilon).ln() / (1.0 / delta).ln(),
        batch_size: cfg.batch_size,
        mean_degree,
    })
}

/// Exact probability that an FRC with `d | n` fails to decode: at least
/// one of the `n/d` replica blocks has all `d` holders straggling, with
/// the straggler set uniform over all `C(n, s)` subsets.
///
/// Full inclusion–exclusion over dead-block counts:
///
/// ```text
/// sum_{k=1}^{min(n/d, floor(s/d))} (-1)^{k+1} C(n/d, k) C(n-kd, s-kd) / C(n, s)
/// ```
///
/// Terms are alternating sums of huge binomials — catastrophically
/// cancellative in floating point — so the sum is taken over exact
/// big-integer binomials and converted to `f64` at the end.
pub fn frc_failure_exact(n: usize, d: usize, s: usize) -> Result<f64> {
    if d == 0 || d > n {
        return Err(Error::invalid(format!(
            "need 1 <= d <= n, got d = {d}, n = {n}"
        )));
    }
    if !n.is_multiple_of(d) {
        return Err(Error::invalid(format!(
            "closed form assumes equal replica groups: d = {d} does not divide n = {n}"
        )));
    }
    if s >= n {
        return Err(Error::invalid(format!("need s < n, got s = {s}, n = {n}")));
    }
    let blocks = n / d;
    let k_max = blocks.min(s / d);
    let mut numerator = BigInt::zero();
    for k in 1..=k_max {
        let term = binomial(blocks, k) * binomial(n - k * d, s - k * d);
        if k % 2 == 1 {
            numerator += term;
        } else {
            numerator -= term;
        }
    }
    debug_assert!(!numerator.is_negative());
    let p = Ratio::new(numerator, binomial(n, s));
    Ok(p.to_f64().expect("probability fits in f64"))
}

/// Exact binomial coefficient `C(n, k)` as a big integer.
pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(4, 2), BigInt::from(6));
        assert_eq!(binomial(6, 0), BigInt::from(1));
        assert_eq!(binomial(6, 6), BigInt::from(1));
        assert_eq!(binomial(5, 7), BigInt::zero());
        assert_eq!(binomial(60, 6), BigInt::from(50_063_860u64));
    }

    #[test]
    fn lb_exact_reference_point() {
        let v = lb_exact(1000, 100).unwrap();
        assert!((v - 2.0458).abs() < 1e-3, "got {v}");
        assert_eq!(v.ceil() as usize, 3);
    }

    #[test]
    fn lb_exact_clamps_to_one() {
        // n=1000, s=1: the raw formula is far below 1.
        assert_eq!(lb_exact(1000, 1).unwrap(), 1.0);
        assert_eq!(lb_exact(1000, 0).unwrap(), 1.0);
    }

    #[test]
    fn lb_exact_monotone_in_s() {
        let mut prev = 0.0;
        for s in (10..=500).step_by(10) {
            let v = lb_exact(1000, s).unwrap();
            assert!(v >= prev - 1e-12, "s = {s}: {v} < {prev}");
            prev = v;
        }
    }

    #[test]
    fn lb_eps_reference_point_and_clamp() {
        let raw = lb_eps_unclamped(1000, 100, 0.01).unwrap();
        assert!((raw - 0.6655).abs() < 1e-3, "got {raw}");
        assert_eq!(lb_eps(1000, 100, 0.01).unwrap(), 1.0);
    }

    #[test]
    fn lb_eps_at_zero_is_below_lb_exact() {
        for s in [10, 50, 100, 200, 400] {
            let eps0 = lb_eps(1000, s, 0.0).unwrap();
            let exact = lb_exact(1000, s).unwrap();
            assert!(eps0 <= exact + 1e-12, "s = {s}");
        }
    }

    #[test]
    fn lb_eps_monotone_in_eps() {
        let mut prev = f64::INFINITY;
        for eps in [0.0, 0.001, 0.005, 0.01, 0.05, 0.1] {
            let v = lb_eps(1000, 100, eps).unwrap();
            assert!(v <= prev + 1e-12, "eps = {eps}");
            prev = v;
        }
    }

    #[test]
    fn frc_load_reference_points() {
        assert_eq!(frc_load(1000, 100).unwrap(), 4);
        assert_eq!(frc_load(100, 10).unwrap(), 3);
        assert_eq!(frc_load(1000, 0).unwrap(), 1);
    }

    #[test]
    fn brc_load_reference_point() {
        let summary = brc_load(1000, 100, 0.1).unwrap();
        assert_eq!(summary.batch_size, 2);
        assert!((summary.mean_degree - 3.0277).abs() < 1e-3);
        assert!((summary.expected_load - 6.0555).abs() < 2e-3);
        assert!((summary.order_term - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brc_load_grows_with_delta() {
        // The batch size ceil(1/ln(1/delta)) + 1 grows as delta -> 1, so
        // at fixed eps the expected load is non-decreasing in delta.
        let mut prev = 0.0;
        for s in [50, 100, 200, 300, 400, 500] {
            let v = brc_load(1000, s, 0.1).unwrap().expected_load;
            assert!(v >= prev - 1e-12, "s = {s}: {v} < {prev}");
            prev = v;
        }
        assert_eq!(brc_load(1000, 400, 0.1).unwrap().batch_size, 3);
    }

    #[test]
    fn frc_failure_reference_points() {
        assert!((frc_failure_exact(4, 2, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(frc_failure_exact(8, 2, 0).unwrap(), 0.0);
        assert_eq!(frc_failure_exact(6, 1, 1).unwrap(), 1.0);
        assert!(frc_failure_exact(6, 4, 1).is_err()); // 4 does not divide 6
    }

    #[test]
    fn frc_failure_monotone_in_d_and_s() {
        // non-increasing in d at fixed (n, s)
        let n = 12;
        let s = 4;
        let mut prev = f64::INFINITY;
        for d in [1, 2, 3, 4] {
            let p = frc_failure_exact(n, d, s).unwrap();
            assert!(p <= prev + 1e-15, "d = {d}");
            prev = p;
        }
        // non-decreasing in s at fixed (n, d)
        let mut prev = -1.0;
        for s in 0..12 {
            let p = frc_failure_exact(12, 3, s).unwrap();
            assert!(p >= prev - 1e-15, "s = {s}");
            prev = p;
        }
    }

    #[test]
    fn regime_flag_threshold() {
        assert!(in_regime(1000, 0.0));
        assert!(in_regime(1000, 0.01));
        assert!(!in_regime(1000, 0.05));
    }
}

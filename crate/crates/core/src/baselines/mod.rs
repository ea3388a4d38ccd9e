//! Reference bounds the DP converse is compared against: the classical
//! converses for the BSC and BEC, and a random-coding (dependence-testing)
//! achievability for arbitrary channels.
//!
//! The BSC and BEC converses each come in two independent implementations,
//! one from log-gamma binomial coefficients and one from a probability
//! recurrence, which serve as oracles for each other.

mod bec;
mod bsc;
mod rc;

pub use bec::{bec_converse, bec_converse_recurrence};
pub use bsc::{bsc_converse, bsc_converse_recurrence};
pub use rc::{rc_achievability, RcOptions, RC_DEFAULT_DELTA};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    BscConverse,
    BecConverse,
    RcAchievability,
}

impl BaselineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineKind::BscConverse => "bsc_converse",
            BaselineKind::BecConverse => "bec_converse",
            BaselineKind::RcAchievability => "rc_achievability",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineResult {
    pub n: usize,
    pub epsilon: f64,
    /// Bits per channel use.
    pub rate: f64,
    pub kind: BaselineKind,
}

pub(crate) fn ln_choose(n: usize, k: usize) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `ln(sum exp(x_i))`, `-inf` for an empty or all-`-inf` input.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Message counts are integers: converts a real bound on `log2 M` into the
/// bound on `log2 floor(M)`. Above 2^52 the floor is invisible in `f64`.
pub(crate) fn floor_log2_count(log2_m: f64) -> f64 {
    if log2_m < 52.0 {
        log2_m.exp2().floor().max(1.0).log2()
    } else {
        log2_m
    }
}

pub(crate) fn check_args(n: usize, epsilon: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Argument("blocklength must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Argument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// Largest `x` in `[lo, hi]` with `feasible(x)`, assuming monotonicity and
/// `feasible(lo)`.
pub(crate) fn bisect_last_feasible(mut lo: f64, mut hi: f64, feasible: impl Fn(f64) -> bool) -> f64 {
    if feasible(hi) {
        return hi;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_choose_small() {
        assert!((ln_choose(10, 3) - 120f64.ln()).abs() < 1e-12);
        assert_eq!(ln_choose(5, 0), 0.0);
    }

    #[test]
    fn log_sum_exp_basics() {
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn floor_counts() {
        assert_eq!(floor_log2_count(2.5f64.log2()), 1.0);
        assert_eq!(floor_log2_count(3.0), 3.0);
        assert_eq!(floor_log2_count(100.3), 100.3);
        assert_eq!(floor_log2_count(-1.0), 0.0);
    }
}

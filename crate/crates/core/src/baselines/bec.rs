//! BEC converse by erasure counting: with `l` erasures the decoder sees at
//! most `2^(n-l)` distinguishable outputs, so any code with `M` messages
//! errs with probability at least `sum_l P(l) [1 - 2^(n-l)/M]^+`.

use super::{bisect_last_feasible, check_args, floor_log2_count, ln_choose};
use crate::error::{Error, Result};

fn check_pe(pe: f64) -> Result<()> {
    if pe > 0.0 && pe < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("erasure probability must lie in (0, 1), got {pe}")))
    }
}

/// Error floor for `log2 M = m` given `ln P(l)` for `l = 0..=n`.
fn error_floor(n: usize, log_pmf: &[f64], m: f64) -> f64 {
    let mut acc = 0.0;
    for (l, lp) in log_pmf.iter().enumerate().rev() {
        let e = n as f64 - l as f64 - m;
        if e >= 0.0 {
            break;
        }
        acc += lp.exp() * -(e * std::f64::consts::LN_2).exp_m1();
    }
    acc
}

fn solve(n: usize, epsilon: f64, log_pmf: &[f64]) -> f64 {
    let m = bisect_last_feasible(0.0, n as f64, |m| error_floor(n, log_pmf, m) <= epsilon);
    floor_log2_count(m) / n as f64
}

/// Rate bound (bits/use); erasure-count weights from log-gamma.
pub fn bec_converse(n: usize, pe: f64, epsilon: f64) -> Result<f64> {
    check_args(n, epsilon)?;
    check_pe(pe)?;
    let (a, b) = (pe.ln(), (-pe).ln_1p());
    let log_pmf: Vec<f64> =
        (0..=n).map(|l| ln_choose(n, l) + l as f64 * a + (n - l) as f64 * b).collect();
    Ok(solve(n, epsilon, &log_pmf))
}

/// Same bound; weights from `P(l+1) = P(l) (n-l)/(l+1) pe/(1-pe)`.
pub fn bec_converse_recurrence(n: usize, pe: f64, epsilon: f64) -> Result<f64> {
    check_args(n, epsilon)?;
    check_pe(pe)?;
    let odds = (pe / (1.0 - pe)).ln();
    let mut log_pmf = Vec::with_capacity(n + 1);
    let mut cur = n as f64 * (1.0 - pe).ln();
    for l in 0..=n {
        log_pmf.push(cur);
        cur += ((n - l) as f64).ln() - ((l + 1) as f64).ln() + odds;
    }
    Ok(solve(n, epsilon, &log_pmf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        // 0.25 (1 - 1/M) + 0.5 (1 - 2/M)^+ = 0.25 at M = 2.5
        let log_pmf = [0.25f64.ln(), 0.5f64.ln(), 0.25f64.ln()];
        assert!((error_floor(2, &log_pmf, 1.0) - 0.125).abs() < 1e-15);
        assert!((error_floor(2, &log_pmf, 3f64.log2()) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(bec_converse(2, 0.5, 0.25).unwrap(), 0.5);
        assert_eq!(bec_converse_recurrence(2, 0.5, 0.25).unwrap(), 0.5);
    }

    #[test]
    fn real_valued_crossing() {
        let log_pmf = [0.25f64.ln(), 0.5f64.ln(), 0.25f64.ln()];
        let m = bisect_last_feasible(0.0, 2.0, |m| error_floor(2, &log_pmf, m) <= 0.25);
        assert!((m - 2.5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn noiseless_limit() {
        assert_eq!(bec_converse(50, 1e-15, 1e-3).unwrap(), 1.0);
    }

    #[test]
    fn implementations_agree() {
        for &(n, pe, eps) in &[(500, 0.3, 1e-4), (300, 0.3, 1e-4), (77, 0.6, 0.01), (5000, 0.1, 1e-6)] {
            let a = bec_converse(n, pe, eps).unwrap();
            let b = bec_converse_recurrence(n, pe, eps).unwrap();
            assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn below_capacity() {
        let r = bec_converse(500, 0.3, 1e-4).unwrap();
        assert!(r < 0.7 && r > 0.6, "{r}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(bec_converse(10, 0.0, 0.1).is_err());
        assert!(bec_converse(10, 1.0, 0.1).is_err());
        assert!(bec_converse(10, 0.3, 0.0).is_err());
    }
}

//! BSC converse: the Neyman-Pearson test between `n` uses of the channel
//! and the uniform output distribution. Both measures depend on the output
//! only through the number of flips `t`, and the likelihood ratio decreases
//! in `t`, so the optimal randomized test accepts `t < L` outright and
//! `t = L` with probability `lambda`, tuned so the channel measure of the
//! acceptance region is `1 - eps`. Then `M <= 1 / beta`, with `beta` the
//! uniform measure of the same region.

use super::{check_args, floor_log2_count, ln_choose, log_sum_exp};
use crate::error::{Error, Result};

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 0.5 {
        Ok(())
    } else {
        Err(Error::Argument(format!("BSC crossover must lie in (0, 0.5), got {p}")))
    }
}

/// `log2 M` bound from per-weight log-probabilities under the channel
/// (`log_p`) and the uniform measure (`log_q`), natural log.
fn bound_from_weights(n: usize, epsilon: f64, log_p: &[f64], log_q: &[f64]) -> f64 {
    // Upper tails are sums of small terms, so the split is located without
    // the cancellation in 1 - eps - (lower cumulative).
    let mut tail = vec![0.0; n + 2];
    for t in (0..=n).rev() {
        tail[t] = tail[t + 1] + log_p[t].exp();
    }
    let split = (0..=n).find(|&t| tail[t + 1] <= epsilon).unwrap_or(n);
    let pt = log_p[split].exp();
    let lambda = if pt > 0.0 { ((tail[split] - epsilon) / pt).clamp(0.0, 1.0) } else { 1.0 };
    let mut terms: Vec<f64> = log_q[..split].to_vec();
    if lambda > 0.0 {
        terms.push(lambda.ln() + log_q[split]);
    }
    let log2_beta = log_sum_exp(&terms) / std::f64::consts::LN_2;
    let log2_m = (-log2_beta).min(n as f64);
    floor_log2_count(log2_m)
}

/// Rate bound (bits/use) with binomial weights from log-gamma.
pub fn bsc_converse(n: usize, p: f64, epsilon: f64) -> Result<f64> {
    check_args(n, epsilon)?;
    check_p(p)?;
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let nl2 = n as f64 * std::f64::consts::LN_2;
    let log_p: Vec<f64> = (0..=n)
        .map(|t| ln_choose(n, t) + t as f64 * lp + (n - t) as f64 * lq)
        .collect();
    let log_q: Vec<f64> = (0..=n).map(|t| ln_choose(n, t) - nl2).collect();
    Ok(bound_from_weights(n, epsilon, &log_p, &log_q) / n as f64)
}

/// Same bound, with the channel weights from the ratio recurrence
/// `P(t+1) = P(t) (n-t)/(t+1) p/(1-p)` and the uniform weights recovered
/// through the likelihood ratio.
pub fn bsc_converse_recurrence(n: usize, p: f64, epsilon: f64) -> Result<f64> {
    check_args(n, epsilon)?;
    check_p(p)?;
    let odds = (p / (1.0 - p)).ln();
    let mut log_p = Vec::with_capacity(n + 1);
    let mut cur = n as f64 * (1.0 - p).ln();
    for t in 0..=n {
        log_p.push(cur);
        if t < n {
            cur += ((n - t) as f64).ln() - ((t + 1) as f64).ln() + odds;
        }
    }
    // log Q(t) = log P(t) - log [p^t (1-p)^(n-t) 2^n]
    let log_q: Vec<f64> = log_p
        .iter()
        .enumerate()
        .map(|(t, lpt)| {
            lpt - t as f64 * p.ln() - (n - t) as f64 * (1.0 - p).ln() - n as f64 * std::f64::consts::LN_2
        })
        .collect();
    Ok(bound_from_weights(n, epsilon, &log_p, &log_q) / n as f64)
}

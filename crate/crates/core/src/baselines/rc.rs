//! Random-coding achievability in dependence-testing form: with inputs drawn
//! i.i.d. from `g`, some code with `M` messages has error at most
//! `E[2^-[i(X^n;Y^n) - log2((M-1)/2)]^+]`.
//!
//! The information density is quantized *down* to a grid of step `delta`,
//! which can only increase the expectation, and its n-fold distribution is
//! obtained by repeated squaring of the single-step PMF. Mass that is
//! discarded to keep the support small (single-step atoms far in the lower
//! tail, thin tails of intermediate convolutions) is charged as if it always
//! caused an error.

use realfft::num_complex::Complex;
use realfft::RealFftPlanner;

use super::{check_args, floor_log2_count};
use crate::channel::{Dmc, InputDist};
use crate::error::{Error, Result};
use crate::kernel::SHIFT_SNAP_TOL;

pub const RC_DEFAULT_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcOptions {
    pub delta: f64,
    /// Cap on the support of any intermediate PMF.
    pub max_bins: usize,
    /// Total discarded mass, relative to epsilon.
    pub prune_budget: f64,
}

impl Default for RcOptions {
    fn default() -> Self {
        RcOptions { delta: RC_DEFAULT_DELTA, max_bins: 1 << 24, prune_budget: 1e-6 }
    }
}

/// PMF on consecutive grid levels starting at `offset`.
#[derive(Debug, Clone)]
struct LevelPmf {
    offset: i64,
    p: Vec<f64>,
}

impl LevelPmf {
    /// Drops up to `budget` mass from each end.
    fn trim(&mut self, budget: f64) {
        let mut lo = 0;
        let mut acc = 0.0;
        while lo + 1 < self.p.len() && acc + self.p[lo] <= budget {
            acc += self.p[lo];
            lo += 1;
        }
        let mut hi = self.p.len();
        acc = 0.0;
        while hi > lo + 1 && acc + self.p[hi - 1] <= budget {
            acc += self.p[hi - 1];
            hi -= 1;
        }
        self.p.truncate(hi);
        self.p.drain(..lo);
        self.offset += lo as i64;
    }
}

const DIRECT_LIMIT: usize = 64;

fn convolve(a: &LevelPmf, b: &LevelPmf, max_bins: usize) -> Result<LevelPmf> {
    let len = a.p.len() + b.p.len() - 1;
    if len > max_bins {
        return Err(Error::ResourceCap { what: "rc support", needed: len as u64, cap: max_bins as u64 });
    }
    let offset = a.offset + b.offset;
    if a.p.len().min(b.p.len()) <= DIRECT_LIMIT {
        let mut out = vec![0.0; len];
        for (i, &x) in a.p.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (o, &y) in out[i..].iter_mut().zip(&b.p) {
                *o += x * y;
            }
        }
        return Ok(LevelPmf { offset, p: out });
    }
    let size = len.next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let spectrum = |v: &[f64]| {
        let mut buf = fwd.make_input_vec();
        buf[..v.len()].copy_from_slice(v);
        let mut out = fwd.make_output_vec();
        fwd.process(&mut buf, &mut out).expect("planner-sized buffers");
        out
    };
    let fa = spectrum(&a.p);
    let mut prod: Vec<Complex<f64>> = if std::ptr::eq(a, b) {
        fa.iter().map(|z| z * z).collect()
    } else {
        let fb = spectrum(&b.p);
        fa.iter().zip(&fb).map(|(x, y)| x * y).collect()
    };
    let mut time = inv.make_output_vec();
    inv.process(&mut prod, &mut time).expect("planner-sized buffers");
    let scale = 1.0 / size as f64;
    let p = time[..len].iter().map(|v| (v * scale).max(0.0)).collect();
    Ok(LevelPmf { offset, p })
}

/// Largest `gamma = log2((M-1)/2)` with expected penalty at most `epsilon`,
/// where `dead` is mass that always counts as an error. `None` if even
/// `gamma -> -inf` fails.
fn solve_gamma(pmf: &LevelPmf, delta: f64, dead: f64, epsilon: f64) -> Option<f64> {
    if dead >= epsilon {
        return None;
    }
    let n = pmf.p.len();
    // s[j] = sum_{k >= j} p_k 2^{-(k-j) delta}
    let mut s = vec![0.0; n + 1];
    let decay = (-delta).exp2();
    for j in (0..n).rev() {
        s[j] = pmf.p[j] + decay * s[j + 1];
    }
    let level = |j: usize| (pmf.offset + j as i64) as f64 * delta;
    // On [v_{j-1}, v_j): E(gamma) = dead + below + 2^(gamma - v_j) s_j.
    let mut below = 0.0;
    for j in 0..n {
        if dead + below + s[j] > epsilon {
            return Some(level(j) + ((epsilon - dead - below) / s[j]).log2());
        }
        below += pmf.p[j];
    }
    // Unreachable for epsilon < 1 unless mass was lost to rounding.
    Some(level(n - 1))
}

/// Achievable rate (bits/use) for the channel without feedback.
pub fn rc_achievability(dmc: &Dmc, g: &InputDist, n: usize, epsilon: f64, opts: &RcOptions) -> Result<f64> {
    check_args(n, epsilon)?;
    if !(opts.delta > 0.0 && opts.delta.is_finite()) {
        return Err(Error::Argument(format!("grid step must be positive, got {}", opts.delta)));
    }
    let gp = g.probs();
    if gp.len() != dmc.num_inputs() {
        return Err(Error::Dimension(format!(
            "input distribution has {} entries, channel has {} inputs",
            gp.len(),
            dmc.num_inputs()
        )));
    }
    let ny = dmc.num_outputs();
    let mut py = vec![0.0; ny];
    for (x, row) in dmc.rows().enumerate() {
        for (y, w) in row.iter().enumerate() {
            py[y] += gp[x] * w;
        }
    }

    let mut atoms: Vec<(i64, f64)> = Vec::new();
    for (x, row) in dmc.rows().enumerate() {
        for (y, &w) in row.iter().enumerate() {
            let mass = gp[x] * w;
            if mass > 0.0 {
                let i = (w / py[y]).log2();
                atoms.push(((i / opts.delta + SHIFT_SNAP_TOL).floor() as i64, mass));
            }
        }
    }
    atoms.sort_by_key(|a| a.0);
    let budget = opts.prune_budget * epsilon;

    // Low atoms are dropped while n times their mass stays within half the budget.
    let mut dropped = 0.0;
    let mut first = 0;
    while first + 1 < atoms.len() && (dropped + atoms[first].1) * n as f64 <= 0.5 * budget {
        dropped += atoms[first].1;
        first += 1;
    }
    let atoms = &atoms[first..];
    let lo = atoms[0].0;
    let width = (atoms[atoms.len() - 1].0 - lo) as usize + 1;
    if width > opts.max_bins {
        return Err(Error::ResourceCap { what: "rc support", needed: width as u64, cap: opts.max_bins as u64 });
    }
    let mut base = LevelPmf { offset: lo, p: vec![0.0; width] };
    for &(l, m) in atoms {
        base.p[(l - lo) as usize] += m;
    }

    let ops = 2.0 * (usize::BITS - n.leading_zeros()) as f64;
    let step_budget = 0.5 * budget / ops.max(1.0);
    let mut acc: Option<LevelPmf> = None;
    let mut k = n;
    loop {
        if k & 1 == 1 {
            let mut next = match &acc {
                None => base.clone(),
                Some(a) => convolve(a, &base, opts.max_bins)?,
            };
            next.trim(step_budget);
            acc = Some(next);
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = convolve(&base, &base, opts.max_bins)?;
        base.trim(step_budget);
    }
    let pmf = acc.expect("n >= 1");
    let kept: f64 = pmf.p.iter().sum();
    let dead = (1.0 - kept).max(0.0);

    let log2_m = match solve_gamma(&pmf, opts.delta, dead, epsilon) {
        // M - 1 = 2^(gamma + 1)
        Some(gamma) if gamma + 1.0 > 60.0 => gamma + 1.0,
        Some(gamma) => (1.0 + (gamma + 1.0).exp2()).log2(),
        None => 0.0,
    };
    let cap = (dmc.num_inputs() as f64).log2();
    Ok((floor_log2_count(log2_m) / n as f64).clamp(0.0, cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{bec_converse, bsc_converse};
    use crate::channel::{bec, bsc, identity};
    use crate::baselines::ln_choose;

    fn exact(dmc: &Dmc, n: usize, eps: f64, delta: f64) -> f64 {
        let opts = RcOptions { delta, prune_budget: 0.0, ..RcOptions::default() };
        let g = InputDist::uniform(dmc.num_inputs()).unwrap();
        rc_achievability(dmc, &g, n, eps, &opts).unwrap()
    }

    #[test]
    fn identity_closed_form() {
        // Density is 8 bits surely: 2^-(8 - gamma) <= 0.1, M - 1 <= 2^(gamma+1) = 51.2.
        let r = exact(&identity(2).unwrap(), 8, 0.1, 1e-3);
        assert!((r - 52f64.log2() / 8.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn identity_gets_full_rate_for_large_epsilon() {
        let r = exact(&identity(4).unwrap(), 3, 0.6, 1e-2);
        assert_eq!(r, 2.0);
    }

    fn bec_oracle(n: usize, pe: f64, eps: f64) -> f64 {
        // i = number of unerased symbols, Binomial(n, 1 - pe).
        let logp: Vec<f64> = (0..=n)
            .map(|k| ln_choose(n, k) + k as f64 * (1.0 - pe).ln() + (n - k) as f64 * pe.ln())
            .collect();
        let e = |gamma: f64| -> f64 {
            logp.iter()
                .enumerate()
                .map(|(k, lp)| (lp - ((k as f64 - gamma).max(0.0)) * std::f64::consts::LN_2).exp())
                .sum()
        };
        let (mut lo, mut hi) = (-200.0, n as f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if e(mid) <= eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let log2_m = (1.0 + (lo + 1.0).exp2()).log2();
        floor_log2_count(log2_m) / n as f64
    }

    #[test]
    fn bec_binomial_reduction() {
        for &(n, eps) in &[(20, 0.01), (100, 1e-3), (300, 1e-4)] {
            let r = exact(&bec(0.3).unwrap(), n, eps, 0.25);
            let o = bec_oracle(n, 0.3, eps);
            assert!((r - o).abs() < 1e-9, "n={n}: {r} vs {o}");
        }
    }

    #[test]
    fn fft_path_matches_direct_path() {
        let dmc = bsc(0.11).unwrap();
        let g = InputDist::uniform(2).unwrap();
        let direct = RcOptions { delta: 0.05, prune_budget: 0.0, ..RcOptions::default() };
        // delta 0.05 keeps the single-step support under the direct limit;
        // squaring past it exercises the FFT path.
        let r = rc_achievability(&dmc, &g, 200, 1e-3, &direct).unwrap();
        let a = LevelPmf { offset: 0, p: vec![0.25; 100] };
        let b = LevelPmf { offset: 3, p: vec![0.5; 80] };
        let fft = convolve(&a, &b, 1 << 20).unwrap();
        let mut want = vec![0.0; 179];
        for i in 0..100 {
            for j in 0..80 {
                want[i + j] += 0.125;
            }
        }
        assert_eq!(fft.offset, 3);
        for (x, y) in fft.p.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(r > 0.0 && r < 1.0);
    }

    #[test]
    fn below_channel_converses() {
        let c = bsc_converse(500, 0.11, 1e-4).unwrap();
        let dmc = bsc(0.11).unwrap();
        let g = InputDist::uniform(2).unwrap();
        let r = rc_achievability(&dmc, &g, 500, 1e-4, &RcOptions::default()).unwrap();
        assert!(r < c && r > 0.3, "rc {r} converse {c}");

        let c = bec_converse(300, 0.3, 1e-4).unwrap();
        let r = exact(&bec(0.3).unwrap(), 300, 1e-4, 1e-3);
        assert!(r < c, "rc {r} converse {c}");
    }

    #[test]
    fn pruning_is_conservative() {
        let dmc = bsc(0.11).unwrap();
        let g = InputDist::uniform(2).unwrap();
        let a = rc_achievability(&dmc, &g, 300, 1e-3, &RcOptions { prune_budget: 0.0, ..RcOptions::default() }).unwrap();
        let b = rc_achievability(&dmc, &g, 300, 1e-3, &RcOptions::default()).unwrap();
        assert!(b <= a + 1e-12 && a - b < 1e-3, "{a} {b}");
    }

    #[test]
    fn resource_cap() {
        let dmc = bsc(0.11).unwrap();
        let g = InputDist::uniform(2).unwrap();
        let opts = RcOptions { delta: 1e-4, max_bins: 1000, prune_budget: 0.0 };
        assert!(matches!(
            rc_achievability(&dmc, &g, 100, 1e-3, &opts),
            Err(Error::ResourceCap { .. })
        ));
    }
}

//! The converse at a threshold and the search over thresholds.
//!
//! For any threshold `T` (bits) and any product output distribution,
//!
//! ```text
//! log2 M <= T - log2([P_fail(T) - eps]^+)
//! ```
//!
//! where `P_fail` is the smallest failure probability over feedback
//! controllers. Using the quantized DP's upper bound on the success
//! probability keeps the right-hand side a valid bound. On the grid, `P_fail`
//! only changes at bin boundaries and the bound grows linearly between
//! them, so the candidates are bin boundaries.

use std::time::Instant;

use rayon::prelude::*;

use crate::channel::{Dmc, OutputDist};
use crate::dp::{success_landscape, success_probability_with, Backend, Diagnostics, DpOptions, Setup};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    /// Every boundary in the candidate range, from one shifted DP run.
    #[default]
    Scan,
    /// Coarse subsample of boundaries, then repeated refinement of the best
    /// bracket; one DP per evaluated boundary.
    Bracket,
}

impl SearchStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            SearchStrategy::Scan => "scan",
            SearchStrategy::Bracket => "bracket",
        }
    }
}

impl std::str::FromStr for SearchStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scan" => Ok(SearchStrategy::Scan),
            "bracket" => Ok(SearchStrategy::Bracket),
            other => Err(Error::Argument(format!("unknown search strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub strategy: SearchStrategy,
    /// Boundaries in the coarse pass of [`SearchStrategy::Bracket`].
    pub coarse_count: usize,
    /// Points per refinement round of [`SearchStrategy::Bracket`].
    pub refine_count: usize,
    /// Sweep window half-width, in multiples of the regression residual
    /// scale.
    pub window_scale: f64,
    /// Minimum sweep window half-width, in boundaries.
    pub window_floor: i64,
    /// Also run the full search for windowed sweep entries and keep both.
    pub validate_window: bool,
    /// Restrict sweep searches to the regression window at all.
    pub windowed: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            strategy: SearchStrategy::Scan,
            coarse_count: 64,
            refine_count: 8,
            window_scale: 3.0,
            window_floor: 50,
            validate_window: false,
            windowed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundQuery {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub q: OutputDist,
    pub dp: DpOptions,
    pub search: SearchConfig,
}

impl BoundQuery {
    pub fn new(n: usize, epsilon: f64, delta: f64, q: OutputDist) -> Self {
        Self {
            n,
            epsilon,
            delta,
            q,
            dp: DpOptions::default(),
            search: SearchConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Argument(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.n == 0 {
            return Err(Error::Argument("blocklength must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Argument(format!(
                "bin width must be positive, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// `(T - log2([p_fail - eps]^+)) / n`, `+inf` when `p_fail <= eps`.
pub fn rate_bound(threshold: f64, p_fail: f64, epsilon: f64, n: usize) -> f64 {
    let slack = p_fail - epsilon;
    if slack > 0.0 {
        (threshold - slack.log2()) / n as f64
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Threshold as a bin level; `threshold = level * delta`.
    pub level: i64,
    pub threshold: f64,
    pub p_fail: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConverseResult {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Bits per channel use; may be `+inf`.
    pub rate_bound: f64,
    /// Bound on `log2 M*(n, eps)` in bits.
    pub log2_m_bound: f64,
    pub t_opt: f64,
    pub t_level: i64,
    pub p_fail: f64,
    /// Every evaluated candidate, sorted by level.
    pub evaluations: Vec<Evaluation>,
    /// Candidate levels searched.
    pub searched: (i64, i64),
    /// Set when a windowed sweep search fell back to the full range.
    pub fell_back: bool,
    pub wall_ms: f64,
    pub diagnostics: Diagnostics,
    pub note: Option<String>,
}

/// Converse at one threshold. Returns `(bound, p_fail)`.
pub fn converse_at_threshold(dmc: &Dmc, query: &BoundQuery, threshold: f64) -> Result<(f64, f64)> {
    query.validate()?;
    let setup = Setup::new(dmc, &query.q, query.n, query.delta)?;
    let (s, _) = success_probability_with(&setup, threshold, &query.dp)?;
    let p_fail = 1.0 - s;
    Ok((rate_bound(threshold, p_fail, query.epsilon, query.n), p_fail))
}

/// Candidate levels for the full search: from 0 to one boundary past the
/// highest reachable level.
pub fn full_candidate_range(setup: &Setup) -> (i64, i64) {
    let (_, top) = setup.reach();
    (0, top.max(0) + 1)
}

fn evaluation(level: i64, success: f64, query: &BoundQuery) -> Evaluation {
    let threshold = level as f64 * query.delta;
    let p_fail = 1.0 - success;
    Evaluation {
        level,
        threshold,
        p_fail,
        bound: rate_bound(threshold, p_fail, query.epsilon, query.n),
    }
}

/// Index of the smallest finite bound; earliest on ties.
fn argmin(evals: &[Evaluation]) -> Option<usize> {
    evals
        .iter()
        .enumerate()
        .filter(|(_, e)| e.bound.is_finite())
        .fold(None, |best: Option<(usize, f64)>, (i, e)| match best {
            Some((_, b)) if b <= e.bound => best,
            _ => Some((i, e.bound)),
        })
        .map(|(i, _)| i)
}

fn search_range(
    setup: &Setup,
    query: &BoundQuery,
    range: (i64, i64),
) -> Result<(Vec<Evaluation>, Diagnostics)> {
    match query.search.strategy {
        SearchStrategy::Scan => {
            let (points, diag) = success_landscape(setup, range.0..=range.1, &query.dp)?;
            Ok((
                points
                    .into_iter()
                    .map(|(m, s)| evaluation(m, s, query))
                    .collect(),
                diag,
            ))
        }
        SearchStrategy::Bracket => bracket_search(setup, query, range),
    }
}

fn evenly_spaced(lo: i64, hi: i64, count: usize) -> Vec<i64> {
    let count = count.max(2) as i64;
    let span = hi - lo;
    if span + 1 <= count {
        return (lo..=hi).collect();
    }
    let mut v: Vec<i64> = (0..count)
        .map(|j| lo + ((span as i128 * j as i128) / (count as i128 - 1)) as i64)
        .collect();
    v.dedup();
    v
}

fn bracket_search(
    setup: &Setup,
    query: &BoundQuery,
    range: (i64, i64),
) -> Result<(Vec<Evaluation>, Diagnostics)> {
    let mut evals: Vec<Evaluation> = Vec::new();
    let mut diag: Option<Diagnostics> = None;
    let mut eval_levels = |levels: Vec<i64>, evals: &mut Vec<Evaluation>| -> Result<()> {
        let fresh: Vec<i64> = levels
            .into_iter()
            .filter(|l| evals.binary_search_by_key(l, |e| e.level).is_err())
            .collect();
        let results: Vec<Result<(i64, f64, Diagnostics)>> = fresh
            .par_iter()
            .map(|&m| {
                let (s, d) = success_probability_with(setup, m as f64 * query.delta, &query.dp)?;
                Ok((m, s, d))
            })
            .collect();
        for r in results {
            let (m, s, d) = r?;
            diag = Some(match diag.take() {
                Some(mut acc) => {
                    acc.max_clamp = acc.max_clamp.max(d.max_clamp);
                    acc.flagged |= d.flagged;
                    acc.wall_ms += d.wall_ms;
                    acc
                }
                None => d,
            });
            let e = evaluation(m, s, query);
            let at = evals.partition_point(|x| x.level < m);
            evals.insert(at, e);
        }
        Ok(())
    };

    eval_levels(evenly_spaced(range.0, range.1, query.search.coarse_count), &mut evals)?;
    loop {
        let Some(best) = argmin(&evals) else { break };
        let lo = if best > 0 { evals[best - 1].level } else { evals[best].level };
        let hi = if best + 1 < evals.len() { evals[best + 1].level } else { evals[best].level };
        // every boundary between the neighbours already evaluated?
        if (lo..=hi).all(|l| evals.binary_search_by_key(&l, |e| e.level).is_ok()) {
            break;
        }
        let mut pts = evenly_spaced(lo, evals[best].level, query.search.refine_count / 2 + 1);
        pts.extend(evenly_spaced(evals[best].level, hi, query.search.refine_count / 2 + 1));
        pts.sort_unstable();
        pts.dedup();
        eval_levels(pts, &mut evals)?;
    }
    let diag = diag.unwrap_or(Diagnostics {
        num_bins: 0,
        backend: query.dp.backend,
        padded_length: None,
        max_clamp: 0.0,
        flagged: false,
        wall_ms: 0.0,
    });
    Ok((evals, diag))
}

fn assemble(
    query: &BoundQuery,
    evaluations: Vec<Evaluation>,
    searched: (i64, i64),
    diagnostics: Diagnostics,
    t0: Instant,
) -> ConverseResult {
    let n = query.n;
    let (rate, t_level, t_opt, p_fail, note) = match argmin(&evaluations) {
        Some(i) => {
            let e = evaluations[i];
            (e.bound, e.level, e.threshold, e.p_fail, None)
        }
        None => {
            // vacuous: report the last candidate
            let e = evaluations.last().copied().unwrap_or(Evaluation {
                level: 0,
                threshold: 0.0,
                p_fail: 0.0,
                bound: f64::INFINITY,
            });
            (
                f64::INFINITY,
                e.level,
                e.threshold,
                e.p_fail,
                Some("every candidate threshold has p_fail <= epsilon; the converse is vacuous".to_string()),
            )
        }
    };
    let note = match (note, diagnostics.flagged) {
        (None, true) if diagnostics.backend == Backend::Fft => Some(format!(
            "fft clamp of {:.3e} exceeded tolerance; rerun with the sparse backend",
            diagnostics.max_clamp
        )),
        (n, _) => n,
    };
    ConverseResult {
        n,
        epsilon: query.epsilon,
        delta: query.delta,
        rate_bound: rate,
        log2_m_bound: rate * n as f64,
        t_opt,
        t_level,
        p_fail,
        evaluations,
        searched,
        fell_back: false,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        diagnostics,
        note,
    }
}

/// Minimizes the bound over the full candidate set.
pub fn optimize_threshold(dmc: &Dmc, query: &BoundQuery) -> Result<ConverseResult> {
    query.validate()?;
    let setup = Setup::new(dmc, &query.q, query.n, query.delta)?;
    optimize_in_range(&setup, query, full_candidate_range(&setup))
}

/// Minimizes the bound over candidate levels `range` (inclusive).
pub fn optimize_in_range(setup: &Setup, query: &BoundQuery, range: (i64, i64)) -> Result<ConverseResult> {
    let t0 = Instant::now();
    let (evals, diag) = search_range(setup, query, range)?;
    Ok(assemble(query, evals, range, diag, t0))
}

/// Least-squares line through `(n, T_opt)`; returns `(slope, intercept,
/// rms residual)`.
pub fn fit_line(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Some((slope, intercept, rms))
}

/// A sweep entry: the reported result, plus the full-range result when the
/// windowed search was validated against it.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub n: usize,
    pub result: Result<ConverseResult>,
    pub window: Option<(i64, i64)>,
    pub full: Option<ConverseResult>,
}

/// Bounds for an increasing list of blocklengths. After two completed
/// entries, each search is restricted to a window around the linear
/// prediction of `T_opt`; a minimum on the window edge triggers the full
/// search.
pub fn sweep_blocklengths(dmc: &Dmc, base: &BoundQuery, n_list: &[usize]) -> Result<Vec<SweepEntry>> {
    if n_list.is_empty() {
        return Err(Error::Argument("empty blocklength list".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("blocklengths must be strictly increasing".into()));
    }
    let mut fitted: Vec<(f64, f64)> = Vec::new();
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let query = BoundQuery { n, ..base.clone() };
        let entry = sweep_entry(dmc, &query, &fitted);
        if let Ok(r) = &entry.result {
            if r.rate_bound.is_finite() {
                fitted.push((n as f64, r.t_opt));
            }
        }
        out.push(entry);
    }
    Ok(out)
}

/// One sweep step. `fitted` holds `(n, T_opt)` of the finite entries so
/// far; the window is derived from it when there are at least two.
pub fn sweep_entry(dmc: &Dmc, query: &BoundQuery, fitted: &[(f64, f64)]) -> SweepEntry {
    let n = query.n;
    let setup = match query.validate().and_then(|_| Setup::new(dmc, &query.q, n, query.delta)) {
        Ok(s) => s,
        Err(e) => {
            return SweepEntry {
                n,
                result: Err(e),
                window: None,
                full: None,
            }
        }
    };
    let full_range = full_candidate_range(&setup);
    let window = (query.search.windowed && fitted.len() >= 2)
        .then(|| fit_line(fitted))
        .flatten()
        .map(|(slope, intercept, rms)| {
            let centre = ((slope * n as f64 + intercept) / query.delta).round() as i64;
            let half = ((query.search.window_scale * rms / query.delta).ceil() as i64)
                .max(query.search.window_floor);
            (
                (centre - half).max(full_range.0),
                (centre + half).min(full_range.1),
            )
        })
        .filter(|w| w.0 < w.1);
    let Some(window) = window else {
        return SweepEntry {
            n,
            result: optimize_in_range(&setup, query, full_range),
            window: None,
            full: None,
        };
    };
    let windowed = optimize_in_range(&setup, query, window);
    let on_edge = |r: &ConverseResult| {
        !r.rate_bound.is_finite()
            || (r.t_level == window.0 && window.0 > full_range.0)
            || (r.t_level == window.1 && window.1 < full_range.1)
    };
    let result = match windowed {
        Ok(r) if on_edge(&r) => optimize_in_range(&setup, query, full_range).map(|mut f| {
            f.fell_back = true;
            f
        }),
        other => other,
    };
    let full = if query.search.validate_window {
        optimize_in_range(&setup, query, full_range).ok()
    } else {
        None
    };
    SweepEntry {
        n,
        result,
        window: Some(window),
        full,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{bac, bsc, identity};

    fn query(n: usize, eps: f64, delta: f64, q: OutputDist) -> BoundQuery {
        let mut b = BoundQuery::new(n, eps, delta, q);
        b.dp.backend = Backend::Sparse;
        b
    }

    #[test]
    fn bsc_at_threshold() {
        let q = query(2, 1e-4, 0.01, OutputDist::uniform(2).unwrap());
        let (bound, p_fail) = converse_at_threshold(&bsc(0.11).unwrap(), &q, 1.5).unwrap();
        assert!((p_fail - 0.2079).abs() < 1e-12);
        let expect = (1.5 - (0.2079f64 - 1e-4).log2()) / 2.0;
        assert!((bound - expect).abs() < 1e-12);
        assert!((bound - 1.8834).abs() < 1e-4);
    }

    #[test]
    fn deterministic_success_is_vacuous() {
        let q = query(8, 1e-3, 0.125, OutputDist::uniform(2).unwrap());
        let (bound, p_fail) = converse_at_threshold(&identity(2).unwrap(), &q, 8.0).unwrap();
        assert_eq!(p_fail, 0.0);
        assert!(bound.is_infinite());
        let (bound, _) = converse_at_threshold(&identity(2).unwrap(), &q, -1.0).unwrap();
        assert!(bound.is_infinite());
    }

    #[test]
    fn identity_optimum_one_bin_above() {
        let q = query(8, 1e-3, 0.125, OutputDist::uniform(2).unwrap());
        for strategy in [SearchStrategy::Scan, SearchStrategy::Bracket] {
            let mut q = q.clone();
            q.search.strategy = strategy;
            let r = optimize_threshold(&identity(2).unwrap(), &q).unwrap();
            assert_eq!(r.t_opt, 8.125, "{strategy:?}");
            let expect = (8.125 - 0.999f64.log2()) / 8.0;
            assert!((r.rate_bound - expect).abs() < 1e-12);
            assert!((r.rate_bound - 1.0158).abs() < 1e-4);
            assert!((r.log2_m_bound - 8.0 * expect).abs() < 1e-12);
        }
    }

    #[test]
    fn bsc_two_steps_optimum_below_fixed_threshold() {
        let q = query(2, 1e-4, 0.01, OutputDist::uniform(2).unwrap());
        let r = optimize_threshold(&bsc(0.11).unwrap(), &q).unwrap();
        assert!(r.rate_bound <= 1.8834);
        for e in &r.evaluations {
            assert!(r.rate_bound <= e.bound);
        }
    }

    #[test]
    fn near_one_epsilon_is_vacuous() {
        let q = query(4, 1.0 - 1e-15, 0.1, OutputDist::uniform(2).unwrap());
        let r = optimize_threshold(&bsc(0.11).unwrap(), &q).unwrap();
        // Only thresholds beyond every reachable level keep p_fail = 1 > eps,
        // and there the bound exceeds the trivial log2|X|.
        assert!(r.evaluations.iter().all(|e| e.p_fail == 1.0 || e.bound.is_infinite()));
        assert!(r.rate_bound > 1.0, "{}", r.rate_bound);
    }

    #[test]
    fn bad_queries() {
        let d = bsc(0.11).unwrap();
        for (n, eps, delta) in [(0, 0.1, 0.1), (3, 0.0, 0.1), (3, 1.0, 0.1), (3, 0.1, -1.0)] {
            let q = query(n, eps, delta, OutputDist::uniform(2).unwrap());
            assert!(optimize_threshold(&d, &q).is_err());
        }
    }

    #[test]
    fn bracket_never_beats_scan() {
        let d = bac(0.05, 0.15).unwrap();
        let mut q = query(24, 1e-2, 0.05, OutputDist::new(vec![0.5, 0.5]).unwrap());
        let scan = optimize_threshold(&d, &q).unwrap();
        q.search.strategy = SearchStrategy::Bracket;
        let bracket = optimize_threshold(&d, &q).unwrap();
        assert!(bracket.rate_bound >= scan.rate_bound - 1e-15);
        // each bracket evaluation reproduces the scan's value at that level
        for e in &bracket.evaluations {
            let s = scan.evaluations.iter().find(|x| x.level == e.level).unwrap();
            assert_eq!(s.p_fail.to_bits(), e.p_fail.to_bits());
        }
    }

    #[test]
    fn line_fit() {
        let (s, i, r) = fit_line(&[(4.0, 4.125), (8.0, 8.125), (16.0, 16.125)]).unwrap();
        assert!((s - 1.0).abs() < 1e-12 && (i - 0.125).abs() < 1e-12 && r < 1e-12);
        assert!(fit_line(&[(1.0, 1.0)]).is_none());
        assert!(fit_line(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }

    #[test]
    fn identity_sweep_slope_one() {
        let q = query(1, 1e-3, 0.125, OutputDist::uniform(2).unwrap());
        let entries = sweep_blocklengths(&identity(2).unwrap(), &q, &[4, 8, 16]).unwrap();
        let pts: Vec<(f64, f64)> = entries
            .iter()
            .map(|e| (e.n as f64, e.result.as_ref().unwrap().t_opt))
            .collect();
        assert_eq!(pts, vec![(4.0, 4.125), (8.0, 8.125), (16.0, 16.125)]);
        let (slope, _, _) = fit_line(&pts).unwrap();
        assert!((slope - 1.0).abs() < 1e-12);
        assert!(entries[2].window.is_some());
    }

    #[test]
    fn sweep_rejects_unsorted() {
        let q = query(1, 1e-3, 0.1, OutputDist::uniform(2).unwrap());
        assert!(sweep_blocklengths(&bsc(0.1).unwrap(), &q, &[8, 4]).is_err());
        assert!(sweep_blocklengths(&bsc(0.1).unwrap(), &q, &[]).is_err());
    }

    #[test]
    fn single_entry_sweep_equals_optimize() {
        let q = query(12, 1e-2, 0.05, OutputDist::uniform(2).unwrap());
        let d = bsc(0.2).unwrap();
        let e = sweep_blocklengths(&d, &q, &[12]).unwrap();
        let r = optimize_threshold(&d, &q).unwrap();
        let s = e[0].result.as_ref().unwrap();
        assert_eq!(s.rate_bound, r.rate_bound);
        assert_eq!(s.t_opt, r.t_opt);
    }
}

//! Information-density increments and the quantization grid over the
//! accumulated information density (AID).

use crate::channel::{Dmc, OutputDist};
use crate::error::{Error, Result};

/// Increments closer than this are treated as the same value.
pub const DEDUP_TOL: f64 = 1e-12;

/// Default bin width in bits.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Default cap on the number of exact AID levels the oracle will enumerate.
pub const DEFAULT_LEVEL_CAP: u64 = 1_000_000;

/// One atom of a per-input increment PMF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Increment {
    pub bits: f64,
    pub prob: f64,
}

/// Per-pair increments `log2(W(y|x)/Q(y))` and their per-input PMFs.
#[derive(Debug, Clone)]
pub struct IncrementTable {
    num_inputs: usize,
    num_outputs: usize,
    /// `None` where `W(y|x) = 0`.
    delta_i: Vec<Option<f64>>,
    di_max: f64,
    di_min: f64,
    per_input: Vec<Vec<Increment>>,
}

impl IncrementTable {
    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    /// Increment for `(x, y)`, or `None` if the pair is impossible.
    pub fn increment(&self, x: usize, y: usize) -> Option<f64> {
        self.delta_i[x * self.num_outputs + y]
    }

    pub fn di_max(&self) -> f64 {
        self.di_max
    }

    pub fn di_min(&self) -> f64 {
        self.di_min
    }

    /// Aggregated PMF of the increment under input `x`, sorted by value.
    pub fn pmf(&self, x: usize) -> &[Increment] {
        &self.per_input[x]
    }

    /// Every distinct increment value over all inputs, sorted.
    pub fn distinct_increments(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.per_input.iter().flatten().map(|i| i.bits).collect();
        v.sort_by(f64::total_cmp);
        dedup_sorted(&mut v, DEDUP_TOL);
        v
    }
}

fn dedup_sorted(v: &mut Vec<f64>, tol: f64) {
    v.dedup_by(|b, a| (*b - *a).abs() < tol);
}

pub fn build_increments(dmc: &Dmc, q: &OutputDist) -> Result<IncrementTable> {
    q.check_against(dmc)?;
    let (nx, ny) = (dmc.num_inputs(), dmc.num_outputs());
    let mut delta_i = Vec::with_capacity(nx * ny);
    let mut di_max = f64::NEG_INFINITY;
    let mut di_min = f64::INFINITY;
    let mut per_input = Vec::with_capacity(nx);
    for x in 0..nx {
        let mut atoms = Vec::with_capacity(ny);
        for y in 0..ny {
            let w = dmc.w(x, y);
            if w > 0.0 {
                let d = (w / q.probs()[y]).log2();
                di_max = di_max.max(d);
                di_min = di_min.min(d);
                delta_i.push(Some(d));
                atoms.push(Increment { bits: d, prob: w });
            } else {
                delta_i.push(None);
            }
        }
        atoms.sort_by(|a, b| a.bits.total_cmp(&b.bits));
        let mut merged: Vec<Increment> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if (a.bits - last.bits).abs() < DEDUP_TOL => last.prob += a.prob,
                _ => merged.push(a),
            }
        }
        per_input.push(merged);
    }
    Ok(IncrementTable {
        num_inputs: nx,
        num_outputs: ny,
        delta_i,
        di_max,
        di_min,
        per_input,
    })
}

/// Uniform grid of bin upper boundaries `i * delta` for
/// `i in lower..=upper`.
///
/// Bin `i` is the half-open interval `((i-1) delta, i delta]`; every AID
/// value is represented by the upper boundary of its bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid {
    pub delta: f64,
    pub lower: i64,
    pub upper: i64,
    pub n: usize,
}

impl BinGrid {
    pub fn num_bins(&self) -> usize {
        (self.upper - self.lower + 1) as usize
    }

    /// Upper boundary of bin index `level` (in bits).
    #[inline]
    pub fn boundary(&self, level: i64) -> f64 {
        level as f64 * self.delta
    }

    /// Vector position of bin `level`.
    #[inline]
    pub fn position(&self, level: i64) -> usize {
        debug_assert!(self.contains(level));
        (level - self.lower) as usize
    }

    pub fn contains(&self, level: i64) -> bool {
        (self.lower..=self.upper).contains(&level)
    }

    /// Position of the bin whose upper boundary is 0.
    pub fn zero_position(&self) -> usize {
        self.position(0)
    }

    /// Widens the grid to include `[lower, upper]`.
    pub fn widened(&self, lower: i64, upper: i64) -> Self {
        Self {
            lower: self.lower.min(lower),
            upper: self.upper.max(upper),
            ..*self
        }
    }
}

/// Builds the `delta`-spaced grid over `[n di_min, n di_max]`, anchored so
/// that 0 is a bin boundary.
pub fn build_bins(table: &IncrementTable, n: usize, delta: f64) -> Result<BinGrid> {
    if n == 0 {
        return Err(Error::Argument("blocklength must be at least 1".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Argument(format!("bin width must be positive, got {delta}")));
    }
    let hi = n as f64 * table.di_max();
    let lo = n as f64 * table.di_min();
    let upper = (hi / delta).ceil();
    let mut lower = (lo / delta).floor();
    if lower * delta == lo {
        lower -= 1.0;
    }
    if !(upper.abs() < 4e18 && lower.abs() < 4e18) {
        return Err(Error::Argument(format!("bin width {delta} is too fine")));
    }
    let grid = BinGrid {
        delta,
        lower: (lower as i64).min(0),
        upper: (upper as i64).max(0),
        n,
    };
    let bins = grid.upper - grid.lower + 1;
    if table.di_max() > table.di_min() && bins < 2 {
        return Err(Error::GridTooCoarse { delta, bins });
    }
    Ok(grid)
}

/// Distinct AID values reachable in exactly `k` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLevelSet {
    pub k: usize,
    pub levels: Vec<f64>,
}

impl ExactLevelSet {
    /// Index of the level within [`DEDUP_TOL`]-ish distance of `value`.
    pub fn find(&self, value: f64, tol: f64) -> Option<usize> {
        let i = self.levels.partition_point(|&l| l < value - tol);
        (i < self.levels.len() && (self.levels[i] - value).abs() <= tol).then_some(i)
    }
}

/// Number of multisets of size `k` over `m` symbols, saturating at
/// `u64::MAX`.
fn multiset_count(m: usize, k: usize) -> u64 {
    if m == 0 {
        return u64::from(k == 0);
    }
    // C(k + m - 1, k), built incrementally; each prefix is itself integral.
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        c = c * (m as u128 - 1 + i) / i;
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

pub fn exact_levels(table: &IncrementTable, k: usize, cap: u64) -> Result<ExactLevelSet> {
    let incs = table.distinct_increments();
    let projected = multiset_count(incs.len(), k);
    if projected > cap {
        return Err(Error::ResourceCap {
            what: "exact AID levels",
            needed: projected,
            cap,
        });
    }
    let mut levels = vec![0.0];
    for _ in 0..k {
        let mut next: Vec<f64> = levels
            .iter()
            .flat_map(|l| incs.iter().map(move |g| l + g))
            .collect();
        next.sort_by(f64::total_cmp);
        dedup_sorted(&mut next, DEDUP_TOL);
        levels = next;
    }
    Ok(ExactLevelSet { k, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{bec, bsc, identity, InputDist};

    fn bsc_table() -> IncrementTable {
        build_increments(&bsc(0.11).unwrap(), &OutputDist::uniform(2).unwrap()).unwrap()
    }

    fn bec_table() -> IncrementTable {
        build_increments(
            &bec(0.3).unwrap(),
            &OutputDist::new(vec![0.35, 0.3, 0.35]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn bsc_increments() {
        let t = bsc_table();
        for x in 0..2 {
            let pmf = t.pmf(x);
            assert_eq!(pmf.len(), 2);
            assert!((pmf[0].bits - (0.11f64 / 0.5).log2()).abs() < 1e-15);
            assert!((pmf[0].bits + 2.18442).abs() < 1e-5);
            assert!((pmf[1].bits - 0.83187).abs() < 1e-5);
            assert_eq!(pmf[0].prob, 0.11);
            assert_eq!(pmf[1].prob, 0.89);
        }
    }

    #[test]
    fn bec_increments_skip_impossible_pairs() {
        let t = bec_table();
        assert_eq!(t.increment(0, 2), None);
        assert_eq!(t.increment(1, 0), None);
        assert_eq!(t.di_min(), 0.0);
        assert!((t.di_max() - 1.0).abs() < 1e-15);
        for x in 0..2 {
            let pmf = t.pmf(x);
            assert_eq!(pmf.len(), 2);
            assert_eq!(pmf[0].bits, 0.0);
            assert!((pmf[0].prob - 0.3).abs() < 1e-15);
            assert!((pmf[1].bits - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_single_increment() {
        let t = build_increments(&identity(2).unwrap(), &OutputDist::uniform(2).unwrap()).unwrap();
        assert_eq!(t.pmf(0), &[Increment { bits: 1.0, prob: 1.0 }]);
        assert_eq!(t.pmf(1), &[Increment { bits: 1.0, prob: 1.0 }]);
    }

    #[test]
    fn equal_increments_are_aggregated() {
        // Both outputs give the same ratio under input 0.
        let d = Dmc::new(vec![vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        let t = build_increments(&d, &OutputDist::uniform(2).unwrap()).unwrap();
        assert_eq!(t.pmf(0), &[Increment { bits: 0.0, prob: 1.0 }]);
        assert_eq!(t.pmf(1).len(), 2);
    }

    #[test]
    fn zero_q_on_reachable_output_is_an_error() {
        let d = bsc(0.11).unwrap();
        let q = OutputDist::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            build_increments(&d, &q),
            Err(Error::UnreachableOutput { output: 1 })
        ));
    }

    #[test]
    fn bins_bsc() {
        let g = build_bins(&bsc_table(), 10, 0.5).unwrap();
        assert_eq!((g.lower, g.upper, g.num_bins()), (-44, 17, 62));
    }

    #[test]
    fn bins_identity_keep_zero_boundary() {
        let t = build_increments(&identity(2).unwrap(), &OutputDist::uniform(2).unwrap()).unwrap();
        let g = build_bins(&t, 4, 1.0).unwrap();
        assert_eq!((g.lower, g.upper, g.num_bins()), (0, 4, 5));
        assert_eq!(g.zero_position(), 0);
    }

    #[test]
    fn bins_bec_exact_boundary_decrement() {
        let g = build_bins(&bec_table(), 8, 0.25).unwrap();
        assert_eq!((g.lower, g.upper, g.num_bins()), (-1, 32, 34));
    }

    #[test]
    fn bins_reject_bad_arguments() {
        assert!(build_bins(&bsc_table(), 0, 0.1).is_err());
        assert!(build_bins(&bsc_table(), 3, 0.0).is_err());
        assert!(build_bins(&bsc_table(), 3, f64::NAN).is_err());
    }

    #[test]
    fn levels_examples() {
        let l = exact_levels(&bsc_table(), 2, DEFAULT_LEVEL_CAP).unwrap();
        let (up, down) = ((0.89f64 / 0.5).log2(), (0.11f64 / 0.5).log2());
        let expect = [2.0 * down, up + down, 2.0 * up];
        assert_eq!(l.levels.len(), 3);
        for (a, b) in l.levels.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        for (a, b) in l.levels.iter().zip([-4.36884, -1.35255, 1.66374]) {
            assert!((a - b).abs() < 1e-4);
        }
        assert_eq!(exact_levels(&bsc_table(), 0, 1).unwrap().levels, vec![0.0]);
        let l = exact_levels(&bec_table(), 3, DEFAULT_LEVEL_CAP).unwrap();
        assert_eq!(l.levels.len(), 4);
        for (a, b) in l.levels.iter().zip([0.0, 1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn level_cap() {
        assert!(matches!(
            exact_levels(&bsc_table(), 30, 10),
            Err(Error::ResourceCap { needed: 31, .. })
        ));
        assert_eq!(multiset_count(3, 2), 6);
        assert_eq!(multiset_count(200, 200), u64::MAX);
    }

    #[test]
    fn output_mass_identity() {
        // sum_y W(y|x) 2^{-di} = sum_{y: W>0} Q(y)
        let d = crate::channel::bac(0.2, 0.05).unwrap();
        let g = InputDist::new(vec![0.3, 0.7]).unwrap();
        let q = crate::channel::ca_output_dist(&d, &g).unwrap();
        let t = build_increments(&d, &q).unwrap();
        for x in 0..2 {
            let lhs: f64 = (0..2)
                .filter_map(|y| t.increment(x, y).map(|di| d.w(x, y) * (-di).exp2()))
                .sum();
            assert!((lhs - 1.0).abs() < 1e-14);
        }
    }
}

//! Per-input bin-shift kernels and the two matrix-vector backends.
//!
//! Because every state sits on a bin upper boundary, an increment `di` moves
//! a state at level `l` to level `l + ceil(di / delta)`. The transition
//! matrix for an input is therefore banded Toeplitz and fully described by a
//! handful of `(shift, prob)` taps. Both backends compute
//!
//! ```text
//! out[i] = sum_k p_k * s[i + k]
//! ```
//!
//! with indices outside the grid handled by a [`BoundaryPolicy`].

use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::density::{BinGrid, IncrementTable};
use crate::error::{Error, Result};

/// Bin offsets within this distance of an integer are snapped to it before
/// rounding up, so exact ratios like `1.0 / 0.25` do not pick up an extra
/// bin from floating-point noise.
pub const SHIFT_SNAP_TOL: f64 = 1e-9;

/// Clamps larger than this flag the run as numerically degraded.
pub const CLAMP_FLAG_THRESHOLD: f64 = 1e-8;

/// What a tap reading outside the grid sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Out-of-grid values are zero.
    #[default]
    Zero,
    /// Out-of-grid values repeat the nearest edge value.
    Saturate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftKernel {
    pub input_index: usize,
    /// `(shift, prob)` sorted by shift, shifts distinct.
    pub taps: Vec<(i64, f64)>,
    pub min_shift: i64,
    pub max_shift: i64,
}

impl ShiftKernel {
    pub fn from_taps(input_index: usize, mut taps: Vec<(i64, f64)>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Argument("kernel needs at least one tap".into()));
        }
        taps.sort_by_key(|t| t.0);
        let mut merged: Vec<(i64, f64)> = Vec::with_capacity(taps.len());
        for (k, p) in taps {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += p,
                _ => merged.push((k, p)),
            }
        }
        Ok(Self {
            input_index,
            min_shift: merged[0].0,
            max_shift: merged[merged.len() - 1].0,
            taps: merged,
        })
    }

    /// Band extent `max_shift - min_shift`.
    pub fn extent(&self) -> usize {
        (self.max_shift - self.min_shift) as usize
    }

    pub fn total_mass(&self) -> f64 {
        self.taps.iter().map(|t| t.1).sum()
    }

    /// Same taps as `other`, ignoring the input index.
    pub fn same_taps(&self, other: &Self) -> bool {
        self.taps == other.taps
    }
}

/// `ceil(bits / delta)` with near-integer snapping.
pub fn bin_shift(bits: f64, delta: f64) -> i64 {
    let r = bits / delta;
    let nearest = r.round();
    if (r - nearest).abs() <= SHIFT_SNAP_TOL {
        nearest as i64
    } else {
        r.ceil() as i64
    }
}

pub fn build_kernels(table: &IncrementTable, grid: &BinGrid) -> Result<Vec<ShiftKernel>> {
    (0..table.num_inputs())
        .map(|x| {
            let taps = table
                .pmf(x)
                .iter()
                .map(|inc| (bin_shift(inc.bits, grid.delta), inc.prob))
                .collect();
            ShiftKernel::from_taps(x, taps)
        })
        .collect()
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

/// Clamps every entry into `[0, 1]` and returns the largest adjustment.
pub fn clamp_unit(v: &mut [f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for x in v.iter_mut() {
        let c = x.clamp(0.0, 1.0);
        worst = worst.max((c - *x).abs());
        *x = c;
    }
    worst
}

/// Sparse shift-add product with compensated summation, written into
/// `out`. Returns the largest clamp applied.
pub fn matvec_sparse_into(
    kernel: &ShiftKernel,
    s: &[f64],
    out: &mut [f64],
    comp: &mut Vec<f64>,
    policy: BoundaryPolicy,
) -> f64 {
    let n = s.len();
    assert_eq!(out.len(), n, "output length must match input length");
    out.fill(0.0);
    comp.clear();
    comp.resize(n, 0.0);
    let ni = n as i64;
    for &(k, p) in &kernel.taps {
        // valid i: 0 <= i + k < n
        let lo = (-k).clamp(0, ni) as usize;
        let hi = (ni - k).clamp(0, ni) as usize;
        if lo < hi {
            let src = &s[(lo as i64 + k) as usize..(hi as i64 + k) as usize];
            for ((o, c), &v) in out[lo..hi].iter_mut().zip(&mut comp[lo..hi]).zip(src) {
                let (t, e) = two_sum(*o, p * v);
                *o = t;
                *c += e;
            }
        }
        if policy == BoundaryPolicy::Saturate && n > 0 {
            // rows whose tap falls below index 0 read s[0]; above n-1 read s[n-1]
            let (edge_lo, edge_hi) = (s[0], s[n - 1]);
            for i in 0..lo {
                let (t, e) = two_sum(out[i], p * edge_lo);
                out[i] = t;
                comp[i] += e;
            }
            for i in hi.max(lo)..n {
                let (t, e) = two_sum(out[i], p * edge_hi);
                out[i] = t;
                comp[i] += e;
            }
        }
    }
    for (o, c) in out.iter_mut().zip(comp.iter()) {
        *o += c;
    }
    clamp_unit(out)
}

pub fn matvec_sparse(kernel: &ShiftKernel, s: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; s.len()];
    matvec_sparse_into(kernel, s, &mut out, &mut Vec::new(), BoundaryPolicy::Zero);
    out
}

/// Precomputed spectra for evaluating every kernel on one grid length by
/// zero-padded real FFT convolution.
pub struct ConvolutionPlan {
    num_bins: usize,
    padded_length: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    spectra: Vec<Vec<Complex<f64>>>,
    max_shifts: Vec<i64>,
    extents: Vec<usize>,
}

impl std::fmt::Debug for ConvolutionPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvolutionPlan")
            .field("num_bins", &self.num_bins)
            .field("padded_length", &self.padded_length)
            .field("kernels", &self.spectra.len())
            .finish()
    }
}

/// Scratch buffers for one worker using a [`ConvolutionPlan`].
pub struct FftScratch {
    time: Vec<f64>,
    freq: Vec<Complex<f64>>,
    prod: Vec<Complex<f64>>,
    fwd: Vec<Complex<f64>>,
    inv: Vec<Complex<f64>>,
}

impl ConvolutionPlan {
    pub fn new(kernels: &[ShiftKernel], num_bins: usize) -> Self {
        let band = kernels.iter().map(ShiftKernel::extent).max().unwrap_or(0);
        let padded_length = (num_bins + band).max(2).next_power_of_two();
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(padded_length);
        let inverse = planner.plan_fft_inverse(padded_length);
        let scale = 1.0 / padded_length as f64;
        let mut scratch = forward.make_scratch_vec();
        let spectra = kernels
            .iter()
            .map(|k| {
                // reversed taps: g[m] = p_{max_shift - m}
                let mut g = forward.make_input_vec();
                for &(shift, p) in &k.taps {
                    g[(k.max_shift - shift) as usize] = p * scale;
                }
                let mut spec = forward.make_output_vec();
                forward
                    .process_with_scratch(&mut g, &mut spec, &mut scratch)
                    .expect("buffer sizes come from the planner");
                spec
            })
            .collect();
        Self {
            num_bins,
            padded_length,
            forward,
            inverse,
            spectra,
            max_shifts: kernels.iter().map(|k| k.max_shift).collect(),
            extents: kernels.iter().map(ShiftKernel::extent).collect(),
        }
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn padded_length(&self) -> usize {
        self.padded_length
    }

    pub fn num_kernels(&self) -> usize {
        self.spectra.len()
    }

    pub fn scratch(&self) -> FftScratch {
        FftScratch {
            time: self.forward.make_input_vec(),
            freq: self.forward.make_output_vec(),
            prod: self.forward.make_output_vec(),
            fwd: self.forward.make_scratch_vec(),
            inv: self.inverse.make_scratch_vec(),
        }
    }

    /// Transforms `s` into `scratch.freq`; shared by every kernel applied to
    /// the same vector.
    pub fn load(&self, s: &[f64], scratch: &mut FftScratch) -> Result<()> {
        if s.len() != self.num_bins {
            return Err(Error::Dimension(format!(
                "vector has {} entries, plan expects {}",
                s.len(),
                self.num_bins
            )));
        }
        scratch.time[..s.len()].copy_from_slice(s);
        scratch.time[s.len()..].fill(0.0);
        self.forward
            .process_with_scratch(&mut scratch.time, &mut scratch.freq, &mut scratch.fwd)
            .expect("buffer sizes come from the planner");
        Ok(())
    }

    /// Applies kernel `id` to the vector last passed to [`Self::load`].
    /// Returns the largest clamp applied.
    pub fn apply_loaded(&self, id: usize, scratch: &mut FftScratch, out: &mut [f64]) -> f64 {
        assert_eq!(out.len(), self.num_bins, "output length must match the plan");
        for ((p, a), b) in scratch
            .prod
            .iter_mut()
            .zip(&scratch.freq)
            .zip(&self.spectra[id])
        {
            *p = a * b;
        }
        // the DC and Nyquist bins of a real signal's spectrum are real
        scratch.prod[0].im = 0.0;
        if let Some(last) = scratch.prod.last_mut() {
            last.im = 0.0;
        }
        self.inverse
            .process_with_scratch(&mut scratch.prod, &mut scratch.time, &mut scratch.inv)
            .expect("buffer sizes come from the planner");
        // out[i] = conv[i + max_shift]; the linear convolution lives on
        // [0, num_bins + extent), anything else is an all-out-of-range row
        let support = (self.num_bins + self.extents[id]) as i64;
        let shift = self.max_shifts[id];
        for (i, o) in out.iter_mut().enumerate() {
            let c = i as i64 + shift;
            *o = if (0..support).contains(&c) {
                scratch.time[c as usize]
            } else {
                0.0
            };
        }
        clamp_unit(out)
    }

    /// One-shot convenience wrapper around [`Self::load`] and
    /// [`Self::apply_loaded`].
    pub fn matvec(&self, id: usize, s: &[f64]) -> Result<Vec<f64>> {
        if id >= self.spectra.len() {
            return Err(Error::Argument(format!("no kernel {id} in plan")));
        }
        let mut scratch = self.scratch();
        self.load(s, &mut scratch)?;
        let mut out = vec![0.0; self.num_bins];
        self.apply_loaded(id, &mut scratch, &mut out);
        Ok(out)
    }
}

pub fn matvec_fft(plan: &ConvolutionPlan, kernel_id: usize, s: &[f64]) -> Result<Vec<f64>> {
    plan.matvec(kernel_id, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{bec, bsc, identity, OutputDist};
    use crate::density::{build_bins, build_increments};

    fn grid_with(delta: f64) -> BinGrid {
        BinGrid {
            delta,
            lower: -10,
            upper: 10,
            n: 1,
        }
    }

    #[test]
    fn bsc_taps() {
        let t = build_increments(&bsc(0.11).unwrap(), &OutputDist::uniform(2).unwrap()).unwrap();
        let ks = build_kernels(&t, &grid_with(0.5)).unwrap();
        for k in &ks {
            assert_eq!(k.taps, vec![(-4, 0.11), (2, 0.89)]);
        }
    }

    #[test]
    fn identity_taps() {
        let t = build_increments(&identity(2).unwrap(), &OutputDist::uniform(2).unwrap()).unwrap();
        let ks = build_kernels(&t, &grid_with(1.0)).unwrap();
        assert_eq!(ks[0].taps, vec![(1, 1.0)]);
    }

    #[test]
    fn bec_taps() {
        let t = build_increments(
            &bec(0.3).unwrap(),
            &OutputDist::new(vec![0.35, 0.3, 0.35]).unwrap(),
        )
        .unwrap();
        let g = build_bins(&t, 8, 0.25).unwrap();
        let ks = build_kernels(&t, &g).unwrap();
        for k in &ks {
            assert_eq!(k.taps.len(), 2);
            assert_eq!(k.taps[0].0, 0);
            assert!((k.taps[0].1 - 0.3).abs() < 1e-15);
            assert_eq!(k.taps[1].0, 4);
            assert!((k.taps[1].1 - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn shift_rounds_up_off_integer() {
        assert_eq!(bin_shift(0.83187, 0.5), 2);
        assert_eq!(bin_shift(-2.18442, 0.5), -4);
        assert_eq!(bin_shift(1.0, 0.25), 4);
        assert_eq!(bin_shift(0.30000000000000004, 0.1), 3);
        assert_eq!(bin_shift(0.3001, 0.1), 4);
    }

    #[test]
    fn pure_shift() {
        let k = ShiftKernel::from_taps(0, vec![(1, 1.0)]).unwrap();
        let s = [0.0, 0.0, 1.0];
        assert_eq!(matvec_sparse(&k, &s), vec![0.0, 1.0, 0.0]);
        let plan = ConvolutionPlan::new(std::slice::from_ref(&k), 3);
        let out = matvec_fft(&plan, 0, &s).unwrap();
        assert!((out[1] - 1.0).abs() < 1e-15 && out[0].abs() < 1e-15 && out[2] == 0.0);
    }

    #[test]
    fn saturate_reads_edges() {
        let k = ShiftKernel::from_taps(0, vec![(1, 1.0)]).unwrap();
        let mut out = vec![0.0; 3];
        matvec_sparse_into(&k, &[0.0, 0.5, 1.0], &mut out, &mut Vec::new(), BoundaryPolicy::Saturate);
        assert_eq!(out, vec![0.5, 1.0, 1.0]);
        let k = ShiftKernel::from_taps(0, vec![(-2, 1.0)]).unwrap();
        matvec_sparse_into(&k, &[0.25, 0.5, 1.0], &mut out, &mut Vec::new(), BoundaryPolicy::Saturate);
        assert_eq!(out, vec![0.25, 0.25, 0.25]);
    }

    #[test]
    fn identity_kernel_is_exact() {
        let k = ShiftKernel::from_taps(0, vec![(0, 1.0)]).unwrap();
        let s: Vec<f64> = (0..37).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        assert_eq!(matvec_sparse(&k, &s), s);
        let plan = ConvolutionPlan::new(std::slice::from_ref(&k), s.len());
        let out = matvec_fft(&plan, 0, &s).unwrap();
        for (a, b) in out.iter().zip(&s) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn bsc_indicator_fft_matches_sparse() {
        let k = ShiftKernel::from_taps(0, vec![(-4, 0.11), (2, 0.89)]).unwrap();
        let s: Vec<f64> = (0..10).map(|i| if i >= 5 { 1.0 } else { 0.0 }).collect();
        let plan = ConvolutionPlan::new(std::slice::from_ref(&k), 10);
        let a = matvec_fft(&plan, 0, &s).unwrap();
        let b = matvec_sparse(&k, &s);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
        assert_eq!(b, vec![0.0, 0.0, 0.0, 0.89, 0.89, 0.89, 0.89, 0.89, 0.0, 0.11]);
    }

    #[test]
    fn all_positive_or_negative_shifts() {
        for taps in [vec![(3, 0.5), (5, 0.5)], vec![(-7, 0.25), (-2, 0.75)]] {
            let k = ShiftKernel::from_taps(0, taps).unwrap();
            let s: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
            let plan = ConvolutionPlan::new(std::slice::from_ref(&k), 16);
            let a = matvec_fft(&plan, 0, &s).unwrap();
            let b = matvec_sparse(&k, &s);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let k = ShiftKernel::from_taps(0, vec![(0, 1.0)]).unwrap();
        let plan = ConvolutionPlan::new(std::slice::from_ref(&k), 8);
        assert!(matches!(matvec_fft(&plan, 0, &[0.0; 7]), Err(Error::Dimension(_))));
        assert!(matvec_fft(&plan, 3, &[0.0; 8]).is_err());
    }

    #[test]
    fn padding_covers_band() {
        let k = ShiftKernel::from_taps(0, vec![(-30, 0.5), (40, 0.5)]).unwrap();
        let plan = ConvolutionPlan::new(std::slice::from_ref(&k), 100);
        assert!(plan.padded_length() >= 170);
        assert!(plan.padded_length().is_power_of_two());
    }

    #[test]
    fn merged_duplicate_shifts() {
        let k = ShiftKernel::from_taps(2, vec![(1, 0.25), (-1, 0.5), (1, 0.25)]).unwrap();
        assert_eq!(k.taps, vec![(-1, 0.5), (1, 0.5)]);
        assert_eq!((k.min_shift, k.max_shift, k.extent()), (-1, 1, 2));
        assert!(ShiftKernel::from_taps(0, vec![]).is_err());
    }
}

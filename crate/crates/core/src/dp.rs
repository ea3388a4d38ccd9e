//! Backward recursion for the success probability of the optimal feedback
//! controller on the quantized AID grid, plus the exact unquantized oracle
//! used to check it on small instances.
//!
//! The quantized value `S_k(l)` is the largest probability, over inputs
//! chosen with knowledge of the current bin, that the walk started at bin
//! level `l` after `k` steps ends at or above the threshold. Since the
//! maximization over input distributions is linear, it is attained by a
//! single input, so each step is an element-wise maximum over the inputs'
//! kernel products.

use std::time::Instant;

use crate::channel::{Dmc, OutputDist};
use crate::density::{build_bins, build_increments, exact_levels, BinGrid, IncrementTable};
use crate::error::{Error, Result};
use crate::kernel::{
    build_kernels, matvec_sparse_into, BoundaryPolicy, ConvolutionPlan, FftScratch, ShiftKernel,
    CLAMP_FLAG_THRESHOLD,
};

/// Default cap on the number of bins in one DP grid.
pub const DEFAULT_MAX_BINS: usize = 1 << 26;

/// Matrix-vector backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Zero-padded real FFT convolution.
    Fft,
    /// Direct shift-add with compensated summation.
    Sparse,
    /// Whichever of the two has the lower estimated per-step cost.
    #[default]
    Auto,
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::Fft => "fft",
            Backend::Sparse => "sparse",
            Backend::Auto => "auto",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fft" => Ok(Backend::Fft),
            "sparse" => Ok(Backend::Sparse),
            "auto" => Ok(Backend::Auto),
            other => Err(Error::Argument(format!("unknown backend '{other}'"))),
        }
    }
}

/// Knobs shared by every DP evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpOptions {
    pub backend: Backend,
    pub boundary: BoundaryPolicy,
    pub max_bins: usize,
}

impl Default for DpOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Auto,
            boundary: BoundaryPolicy::Zero,
            max_bins: DEFAULT_MAX_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub num_bins: usize,
    /// Backend actually used (never `Auto`).
    pub backend: Backend,
    pub padded_length: Option<usize>,
    pub max_clamp: f64,
    /// Set when a clamp exceeded [`CLAMP_FLAG_THRESHOLD`].
    pub flagged: bool,
    pub wall_ms: f64,
}

/// `S_k` on every bin of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessVector {
    pub values: Vec<f64>,
    pub step: usize,
}

/// `values[i] = 1` iff the bin's upper boundary is at least `threshold`.
pub fn terminal_vector(grid: &BinGrid, threshold: f64) -> SuccessVector {
    SuccessVector {
        values: (grid.lower..=grid.upper)
            .map(|l| if grid.boundary(l) >= threshold { 1.0 } else { 0.0 })
            .collect(),
        step: grid.n,
    }
}

/// Terminal vector for a threshold that is itself the boundary of bin
/// `level`; compared on integer levels, so it is exact.
pub fn terminal_vector_at_level(grid: &BinGrid, level: i64) -> SuccessVector {
    SuccessVector {
        values: (grid.lower..=grid.upper)
            .map(|l| if l >= level { 1.0 } else { 0.0 })
            .collect(),
        step: grid.n,
    }
}

/// Backward-step operator: the kernels of one channel on one grid, with
/// inputs sharing identical taps collapsed onto a single kernel.
pub struct Recursion {
    grid: BinGrid,
    kernels: Vec<ShiftKernel>,
    /// For each distinct kernel, the lowest input index using it.
    representative: Vec<usize>,
    plan: Option<ConvolutionPlan>,
    backend: Backend,
    boundary: BoundaryPolicy,
}

impl std::fmt::Debug for Recursion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Recursion")
            .field("grid", &self.grid)
            .field("kernels", &self.kernels.len())
            .field("backend", &self.backend)
            .finish()
    }
}

/// Per-worker buffers for [`Recursion::step`].
pub struct Workspace {
    tmp: Vec<f64>,
    comp: Vec<f64>,
    fft: Option<FftScratch>,
}

fn estimated_costs(kernels: &[ShiftKernel], num_bins: usize) -> (f64, f64) {
    let taps: usize = kernels.iter().map(|k| k.taps.len()).sum();
    let band = kernels.iter().map(ShiftKernel::extent).max().unwrap_or(0);
    let p = (num_bins + band).max(2).next_power_of_two() as f64;
    // rough relative costs: a compensated tap update ~ 2 units per bin, a
    // real FFT ~ 1.5 p log2 p units
    let sparse = 2.0 * taps as f64 * num_bins as f64;
    let fft = (1 + kernels.len()) as f64 * 1.5 * p * p.log2();
    (sparse, fft)
}

impl Recursion {
    pub fn new(kernels: Vec<ShiftKernel>, grid: BinGrid, options: &DpOptions) -> Result<Self> {
        let bins = grid.num_bins();
        if bins > options.max_bins {
            return Err(Error::ResourceCap {
                what: "DP bins",
                needed: bins as u64,
                cap: options.max_bins as u64,
            });
        }
        let mut distinct: Vec<ShiftKernel> = Vec::new();
        let mut representative = Vec::new();
        for k in kernels {
            if !distinct.iter().any(|d| d.same_taps(&k)) {
                representative.push(k.input_index);
                distinct.push(k);
            }
        }
        let backend = match options.backend {
            Backend::Auto => {
                let (sparse, fft) = estimated_costs(&distinct, bins);
                if options.boundary == BoundaryPolicy::Saturate || sparse <= fft {
                    Backend::Sparse
                } else {
                    Backend::Fft
                }
            }
            Backend::Fft if options.boundary == BoundaryPolicy::Saturate => {
                return Err(Error::Argument(
                    "the fft backend only supports zero boundary padding".into(),
                ))
            }
            b => b,
        };
        let plan = (backend == Backend::Fft).then(|| ConvolutionPlan::new(&distinct, bins));
        Ok(Self {
            grid,
            kernels: distinct,
            representative,
            plan,
            backend,
            boundary: options.boundary,
        })
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn padded_length(&self) -> Option<usize> {
        self.plan.as_ref().map(ConvolutionPlan::padded_length)
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            tmp: vec![0.0; self.grid.num_bins()],
            comp: Vec::new(),
            fft: self.plan.as_ref().map(ConvolutionPlan::scratch),
        }
    }

    /// Computes `out = max_j M_j next`, optionally recording the maximizing
    /// input (lowest index on ties). Returns the largest clamp applied.
    pub fn step_into(
        &self,
        next: &[f64],
        out: &mut [f64],
        mut policy: Option<&mut [u32]>,
        ws: &mut Workspace,
    ) -> Result<f64> {
        let n = self.grid.num_bins();
        if next.len() != n || out.len() != n {
            return Err(Error::Dimension(format!(
                "success vector has {} entries, grid has {n}",
                next.len()
            )));
        }
        let mut clamp: f64 = 0.0;
        if let (Some(plan), Some(fs)) = (&self.plan, ws.fft.as_mut()) {
            plan.load(next, fs)?;
        }
        for (id, kernel) in self.kernels.iter().enumerate() {
            let dst: &mut [f64] = if id == 0 { out } else { &mut ws.tmp };
            clamp = clamp.max(match (&self.plan, ws.fft.as_mut()) {
                (Some(plan), Some(fs)) => plan.apply_loaded(id, fs, dst),
                _ => matvec_sparse_into(kernel, next, dst, &mut ws.comp, self.boundary),
            });
            if id == 0 {
                if let Some(p) = policy.as_deref_mut() {
                    p.fill(self.representative[0] as u32);
                }
                continue;
            }
            let who = self.representative[id] as u32;
            match policy.as_deref_mut() {
                Some(p) => {
                    for ((o, &t), c) in out.iter_mut().zip(&ws.tmp).zip(p.iter_mut()) {
                        if t > *o {
                            *o = t;
                            *c = who;
                        }
                    }
                }
                None => {
                    for (o, &t) in out.iter_mut().zip(&ws.tmp) {
                        *o = o.max(t);
                    }
                }
            }
        }
        Ok(clamp)
    }

    /// Runs the full recursion from `terminal` down to step 0. Returns the
    /// step-0 vector and the largest clamp.
    pub fn run(
        &self,
        terminal: SuccessVector,
        mut policy: Option<&mut Vec<Vec<u32>>>,
    ) -> Result<(SuccessVector, f64)> {
        let n = self.grid.num_bins();
        let mut ws = self.workspace();
        let mut next = terminal.values;
        let mut cur = vec![0.0; n];
        let mut clamp: f64 = 0.0;
        for k in (0..terminal.step).rev() {
            let row = match policy.as_deref_mut() {
                Some(p) => {
                    p[k].resize(n, 0);
                    Some(p[k].as_mut_slice())
                }
                None => None,
            };
            clamp = clamp.max(self.step_into(&next, &mut cur, row, &mut ws)?);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok((
            SuccessVector {
                values: next,
                step: 0,
            },
            clamp,
        ))
    }
}

/// One backward step `S_k = max_j M_j S_{k+1}`.
pub fn backward_step(recursion: &Recursion, next: &SuccessVector) -> Result<SuccessVector> {
    if next.step == 0 {
        return Err(Error::Argument("cannot step back from step 0".into()));
    }
    let mut out = vec![0.0; next.values.len()];
    let mut ws = recursion.workspace();
    recursion.step_into(&next.values, &mut out, None, &mut ws)?;
    Ok(SuccessVector {
        values: out,
        step: next.step - 1,
    })
}

/// Grid, kernels and increment table for one `(channel, Q, n, delta)`.
#[derive(Debug, Clone)]
pub struct Setup {
    pub table: IncrementTable,
    /// Grid over `[n di_min, n di_max]` as built by [`build_bins`].
    pub base_grid: BinGrid,
    pub kernels: Vec<ShiftKernel>,
    pub min_shift: i64,
    pub max_shift: i64,
}

impl Setup {
    pub fn new(dmc: &Dmc, q: &OutputDist, n: usize, delta: f64) -> Result<Self> {
        let table = build_increments(dmc, q)?;
        Self::from_table(table, n, delta)
    }

    pub fn from_table(table: IncrementTable, n: usize, delta: f64) -> Result<Self> {
        let base_grid = build_bins(&table, n, delta)?;
        let kernels = build_kernels(&table, &base_grid)?;
        let min_shift = kernels.iter().map(|k| k.min_shift).min().unwrap_or(0);
        let max_shift = kernels.iter().map(|k| k.max_shift).max().unwrap_or(0);
        Ok(Self {
            table,
            base_grid,
            kernels,
            min_shift,
            max_shift,
        })
    }

    /// Grid holding every quantized walk that starts at any level in
    /// `starts`. Per-step round-up can carry a walk up to `n` bins past
    /// `n di_max`, so the base grid is widened accordingly.
    pub fn walk_grid(&self, starts: std::ops::RangeInclusive<i64>) -> BinGrid {
        let n = self.base_grid.n as i64;
        self.base_grid.widened(
            (*starts.start()).min(starts.start() + n * self.min_shift),
            (*starts.end()).max(starts.end() + n * self.max_shift),
        )
    }

    /// Lowest and highest level a walk from 0 can reach after `n` steps.
    pub fn reach(&self) -> (i64, i64) {
        let n = self.base_grid.n as i64;
        (n * self.min_shift, n * self.max_shift)
    }
}

/// Upper bound on the optimal controller's success probability at
/// threshold `threshold` (bits).
pub fn success_probability(
    dmc: &Dmc,
    q: &OutputDist,
    n: usize,
    threshold: f64,
    delta: f64,
    options: &DpOptions,
) -> Result<(f64, Diagnostics)> {
    let setup = Setup::new(dmc, q, n, delta)?;
    success_probability_with(&setup, threshold, options)
}

pub fn success_probability_with(
    setup: &Setup,
    threshold: f64,
    options: &DpOptions,
) -> Result<(f64, Diagnostics)> {
    let t0 = Instant::now();
    let grid = setup.walk_grid(0..=0);
    let rec = Recursion::new(setup.kernels.clone(), grid, options)?;
    let (s0, clamp) = rec.run(terminal_vector(&grid, threshold), None)?;
    let p = s0.values[grid.zero_position()];
    Ok((p, diagnostics(&rec, clamp, t0)))
}

fn diagnostics(rec: &Recursion, clamp: f64, t0: Instant) -> Diagnostics {
    Diagnostics {
        num_bins: rec.grid().num_bins(),
        backend: rec.backend(),
        padded_length: rec.padded_length(),
        max_clamp: clamp,
        flagged: clamp > CLAMP_FLAG_THRESHOLD,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    }
}

/// Success probability at every boundary threshold `level * delta` for
/// `level in levels`, from a single recursion.
///
/// The kernels are shift-invariant, so the value for threshold level `m`
/// read at start 0 equals the value for threshold level `hi` read at start
/// `hi - m`. One run on a grid wide enough for every such start therefore
/// yields the whole landscape.
pub fn success_landscape(
    setup: &Setup,
    levels: std::ops::RangeInclusive<i64>,
    options: &DpOptions,
) -> Result<(Vec<(i64, f64)>, Diagnostics)> {
    let t0 = Instant::now();
    let (lo, hi) = (*levels.start(), *levels.end());
    if lo > hi {
        return Ok((Vec::new(), empty_diagnostics(options)));
    }
    let grid = setup.walk_grid(0..=hi - lo);
    let rec = Recursion::new(setup.kernels.clone(), grid, options)?;
    let (s0, clamp) = rec.run(terminal_vector_at_level(&grid, hi), None)?;
    let out = (lo..=hi)
        .map(|m| (m, s0.values[grid.position(hi - m)]))
        .collect();
    Ok((out, diagnostics(&rec, clamp, t0)))
}

fn empty_diagnostics(options: &DpOptions) -> Diagnostics {
    Diagnostics {
        num_bins: 0,
        backend: options.backend,
        padded_length: None,
        max_clamp: 0.0,
        flagged: false,
        wall_ms: 0.0,
    }
}

/// Maximizing input for every `(step, bin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub grid: BinGrid,
    /// `choice[k][grid.position(level)]` for `k in 0..n`.
    pub choice: Vec<Vec<u32>>,
}

impl PolicyTable {
    pub fn input_at(&self, step: usize, level: i64) -> u32 {
        self.choice[step][self.grid.position(level)]
    }
}

pub fn extract_policy(
    dmc: &Dmc,
    q: &OutputDist,
    n: usize,
    threshold: f64,
    delta: f64,
    options: &DpOptions,
) -> Result<(PolicyTable, f64)> {
    let setup = Setup::new(dmc, q, n, delta)?;
    let grid = setup.walk_grid(0..=0);
    // sharing a kernel between inputs would hide the lowest-index argmax
    // only if the representative were not the lowest index; it always is
    let rec = Recursion::new(setup.kernels.clone(), grid, options)?;
    let mut choice = vec![Vec::new(); n];
    let (s0, _) = rec.run(terminal_vector(&grid, threshold), Some(&mut choice))?;
    Ok((PolicyTable { grid, choice }, s0.values[grid.zero_position()]))
}

/// Tolerance for matching floating-point sums onto exact level sets.
const LEVEL_MATCH_TOL: f64 = 1e-9;

/// Exact optimal success probability `S_0(0)` over unquantized AID levels.
pub fn exact_success_oracle(
    dmc: &Dmc,
    q: &OutputDist,
    n: usize,
    threshold: f64,
    level_cap: u64,
) -> Result<f64> {
    let table = build_increments(dmc, q)?;
    // values at step k indexed by the level set of step k
    let mut sets = Vec::with_capacity(n + 1);
    for k in 0..=n {
        sets.push(exact_levels(&table, k, level_cap)?);
    }
    let mut next: Vec<f64> = sets[n]
        .levels
        .iter()
        .map(|&l| if l >= threshold { 1.0 } else { 0.0 })
        .collect();
    for k in (0..n).rev() {
        let cur: Vec<f64> = sets[k]
            .levels
            .iter()
            .map(|&l| {
                (0..table.num_inputs())
                    .map(|x| {
                        table
                            .pmf(x)
                            .iter()
                            .map(|inc| {
                                let i = sets[k + 1]
                                    .find(l + inc.bits, LEVEL_MATCH_TOL)
                                    .expect("successor level is enumerated");
                                inc.prob * next[i]
                            })
                            .sum::<f64>()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        next = cur;
    }
    Ok(next[0])
}

//! Discrete memoryless channels and the distributions defined over their
//! alphabets.
//!
//! A [`Dmc`] is stored as a dense row-major `|X| x |Y|` matrix of transition
//! probabilities `W(y|x)`. Entries that are zero stay exactly zero; the
//! increment tables built downstream skip those pairs entirely.

mod awgn;
mod capacity;
pub mod file;

pub use awgn::{quantized_awgn, AwgnQuantSpec};
pub use capacity::{blahut_arimoto, mutual_information, Capacity, BA_DEFAULT_MAX_ITER, BA_DEFAULT_TOL};

use crate::error::{Error, Result};

/// Default absolute tolerance on row sums.
pub const DEFAULT_ROW_TOL: f64 = 1e-9;

/// Tolerance on distribution sums.
pub const DIST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Dmc {
    num_inputs: usize,
    num_outputs: usize,
    w: Vec<f64>,
    input_labels: Option<Vec<String>>,
    output_labels: Option<Vec<String>>,
}

impl Dmc {
    /// Builds a channel from its rows, enforcing the default 1e-9 row-sum
    /// tolerance.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_rows(&rows, DEFAULT_ROW_TOL)?;
        Ok(Self::from_rows_unchecked(rows))
    }

    /// Builds a channel from rows that are only accurate to `tol`, e.g. a
    /// matrix rounded to two decimals. Rows are validated against `tol` and
    /// then renormalized to sum to one.
    pub fn with_tolerance(rows: Vec<Vec<f64>>, tol: f64) -> Result<Self> {
        validate_rows(&rows, tol)?;
        let rows = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|v| v / s).collect()
            })
            .collect();
        Ok(Self::from_rows_unchecked(rows))
    }

    fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Self {
        let num_inputs = rows.len();
        let num_outputs = rows[0].len();
        Self {
            num_inputs,
            num_outputs,
            w: rows.into_iter().flatten().collect(),
            input_labels: None,
            output_labels: None,
        }
    }

    pub fn with_labels(
        mut self,
        input_labels: Option<Vec<String>>,
        output_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if let Some(l) = &input_labels {
            if l.len() != self.num_inputs {
                return Err(Error::Dimension(format!(
                    "{} input labels for {} inputs",
                    l.len(),
                    self.num_inputs
                )));
            }
        }
        if let Some(l) = &output_labels {
            if l.len() != self.num_outputs {
                return Err(Error::Dimension(format!(
                    "{} output labels for {} outputs",
                    l.len(),
                    self.num_outputs
                )));
            }
        }
        self.input_labels = input_labels;
        self.output_labels = output_labels;
        Ok(self)
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    /// `W(y|x)`.
    #[inline]
    pub fn w(&self, x: usize, y: usize) -> f64 {
        self.w[x * self.num_outputs + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.w[x * self.num_outputs..(x + 1) * self.num_outputs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.w.chunks_exact(self.num_outputs)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn input_labels(&self) -> Option<&[String]> {
        self.input_labels.as_deref()
    }

    pub fn output_labels(&self) -> Option<&[String]> {
        self.output_labels.as_deref()
    }

    /// Re-checks every invariant at the default tolerance.
    pub fn validate(&self) -> Result<()> {
        validate_rows(&self.to_rows(), DEFAULT_ROW_TOL)
    }

    /// `true` if some input reaches output `y` with positive probability.
    pub fn output_reachable(&self, y: usize) -> bool {
        (0..self.num_inputs).any(|x| self.w(x, y) > 0.0)
    }

    /// Stable 64-bit fingerprint of the transition matrix (dimensions and
    /// exact bit patterns), used for cache keys.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(&(self.num_inputs as u64).to_le_bytes());
        eat(&(self.num_outputs as u64).to_le_bytes());
        for v in &self.w {
            eat(&v.to_bits().to_le_bytes());
        }
        h
    }
}

/// Checks the channel invariants on raw rows and reports the first
/// violation.
pub fn validate_rows(rows: &[Vec<f64>], tol: f64) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyAlphabet("input"));
    }
    let cols = rows[0].len();
    if cols == 0 {
        return Err(Error::EmptyAlphabet("output"));
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::RowLength {
                row: r,
                found: row.len(),
                expected: cols,
            });
        }
        for (c, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::RowSum { row: r, sum, tol });
        }
    }
    Ok(())
}

fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::ParameterRange { what, value })
    }
}

/// Binary symmetric channel with crossover probability `p`.
pub fn bsc(p: f64) -> Result<Dmc> {
    check_unit("crossover probability", p)?;
    Dmc::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
}

/// Binary erasure channel; the erasure symbol is the middle output.
pub fn bec(pe: f64) -> Result<Dmc> {
    check_unit("erasure probability", pe)?;
    Dmc::new(vec![vec![1.0 - pe, pe, 0.0], vec![0.0, pe, 1.0 - pe]])
}

/// Binary asymmetric channel: `p1` flips a 0, `p2` flips a 1.
pub fn bac(p1: f64, p2: f64) -> Result<Dmc> {
    check_unit("crossover probability p1", p1)?;
    check_unit("crossover probability p2", p2)?;
    Dmc::new(vec![vec![1.0 - p1, p1], vec![p2, 1.0 - p2]])
}

/// Noiseless channel on `k` symbols.
pub fn identity(k: usize) -> Result<Dmc> {
    if k == 0 {
        return Err(Error::EmptyAlphabet("input"));
    }
    Dmc::new(
        (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
    )
}

/// Row tolerance accepted for the two-decimal quantized-AWGN fixture.
pub const AWGN_FIXTURE_TOL: f64 = 1e-2;

/// The 8x8 quantized amplitude-constrained AWGN channel, as rounded to two
/// decimals. Rows are renormalized after validation.
pub fn awgn_fixture() -> Dmc {
    Dmc::with_tolerance(awgn_fixture_rows(), AWGN_FIXTURE_TOL).expect("fixture is a valid channel")
}

pub fn awgn_fixture_rows() -> Vec<Vec<f64>> {
    vec![
        vec![0.96, 0.04, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00],
        vec![0.06, 0.84, 0.10, 0.00, 0.00, 0.00, 0.00, 0.00],
        vec![0.00, 0.11, 0.79, 0.10, 0.00, 0.00, 0.00, 0.00],
        vec![0.00, 0.00, 0.08, 0.85, 0.07, 0.00, 0.00, 0.00],
        vec![0.00, 0.00, 0.00, 0.07, 0.85, 0.08, 0.00, 0.00],
        vec![0.00, 0.00, 0.00, 0.00, 0.10, 0.79, 0.11, 0.00],
        vec![0.00, 0.00, 0.00, 0.00, 0.00, 0.10, 0.84, 0.06],
        vec![0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.04, 0.96],
    ]
}

fn check_dist(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Distribution(format!("{what} is empty")));
    }
    if let Some((i, p)) = v
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
    {
        return Err(Error::Distribution(format!("{what}[{i}] = {p}")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > DIST_TOL {
        return Err(Error::Distribution(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// Input distribution `G` on `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDist(Vec<f64>);

impl InputDist {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        check_dist(&g, "input distribution")?;
        Ok(Self(g))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn has_full_support(&self) -> bool {
        self.0.iter().all(|&p| p > 0.0)
    }
}

/// Per-symbol output distribution `Q`; the bound uses its i.i.d. product.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDist(Vec<f64>);

impl OutputDist {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        check_dist(&q, "output distribution")?;
        Ok(Self(q))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Checks dimension and that every reachable output has `q(y) > 0`.
    pub fn check_against(&self, dmc: &Dmc) -> Result<()> {
        if self.0.len() != dmc.num_outputs() {
            return Err(Error::Dimension(format!(
                "Q has {} entries, channel has {} outputs",
                self.0.len(),
                dmc.num_outputs()
            )));
        }
        match (0..dmc.num_outputs()).find(|&y| self.0[y] <= 0.0 && dmc.output_reachable(y)) {
            Some(y) => Err(Error::UnreachableOutput { output: y }),
            None => Ok(()),
        }
    }

    /// Stable fingerprint of the exact probabilities.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.0 {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Output marginal `q(y) = sum_x g(x) W(y|x)`.
pub fn ca_output_dist(dmc: &Dmc, g: &InputDist) -> Result<OutputDist> {
    if g.probs().len() != dmc.num_inputs() {
        return Err(Error::Dimension(format!(
            "input distribution has {} entries, channel has {} inputs",
            g.probs().len(),
            dmc.num_inputs()
        )));
    }
    let mut q = vec![0.0; dmc.num_outputs()];
    for (x, &gx) in g.probs().iter().enumerate() {
        for (qy, &w) in q.iter_mut().zip(dmc.row(x)) {
            *qy += gx * w;
        }
    }
    OutputDist::new(q)
}

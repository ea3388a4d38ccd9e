//! The subcommands as library functions: each takes a resolved
//! configuration and returns the CSV (or channel file) text it produces.

use std::path::PathBuf;

use rayon::prelude::*;

use dpconverse::baselines::{bec_converse, bsc_converse, rc_achievability, BaselineKind, RcOptions};
use dpconverse::bound::{sweep_entry, BoundQuery, SearchConfig, SweepEntry};
use dpconverse::channel::file::{parse_channel, to_json};
use dpconverse::channel::{quantized_awgn, AwgnQuantSpec, Dmc, InputDist};
use dpconverse::dp::DpOptions;

use crate::cache::{sha256_hex, Cache, KeyBuilder};
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_PARTIAL};
use crate::spec::{capacity_input, ChannelSpec, QSelector};
use crate::table::{
    fmt_f64, fmt_ms, parse_results_csv, write_csv, write_plot_csv, PlotPoint, Row, BASELINE_HEADER,
    CONVERSE_HEADER,
};

/// Result of a command: output text plus bookkeeping for the exit status.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub output: String,
    /// Rows that failed.
    pub failures: usize,
    /// Rows computed in this run.
    pub computed: usize,
    /// Rows served from the cache.
    pub cached: usize,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures > 0 {
            EXIT_PARTIAL
        } else {
            EXIT_OK
        }
    }

    fn absorb(&mut self, other: &Outcome) {
        self.failures += other.failures;
        self.computed += other.computed;
        self.cached += other.cached;
        self.warnings.extend(other.warnings.iter().cloned());
    }
}

fn check_epsilon(epsilon: f64) -> CliResult<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("epsilon must lie in (0, 1), got {epsilon}")))
    }
}

#[derive(Debug, Clone)]
pub struct ConverseConfig {
    pub channel: ChannelSpec,
    pub epsilon: f64,
    pub delta: f64,
    pub n: Vec<usize>,
    pub q: QSelector,
    pub dp: DpOptions,
    pub search: SearchConfig,
    /// Record measured wall time; otherwise `wall_ms` is written as zero.
    pub timing: bool,
    pub cache: Option<Cache>,
}

struct ConverseContext<'a> {
    cfg: &'a ConverseConfig,
    dmc: Dmc,
    base: BoundQuery,
    channel_hash: String,
}

impl ConverseContext<'_> {
    fn key(&self, n: usize, history: Option<&[(f64, f64)]>) -> String {
        let c = self.cfg;
        let s = &c.search;
        let mut k = KeyBuilder::new("converse");
        k.text("channel", &self.channel_hash)
            .float("epsilon", c.epsilon)
            .float("delta", c.delta)
            .text("q_kind", c.q.kind())
            .floats("q", self.base.q.probs())
            .text("backend", c.dp.backend.as_str())
            .text("boundary", &format!("{:?}", c.dp.boundary))
            .int("max_bins", c.dp.max_bins as u64)
            .text("strategy", s.strategy.as_str())
            .int("coarse", s.coarse_count as u64)
            .int("refine", s.refine_count as u64)
            .float("window_scale", s.window_scale)
            .text("window_floor", &s.window_floor.to_string())
            .text("windowed", &s.windowed.to_string())
            .text("timing", &c.timing.to_string())
            .int("n", n as u64);
        if let Some(h) = history {
            let flat: Vec<f64> = h.iter().flat_map(|&(a, b)| [a, b]).collect();
            k.floats("history", &flat);
        }
        k.digest()
    }

    fn row(&self, entry: &SweepEntry) -> (Row, Vec<String>) {
        let c = self.cfg;
        let head = [entry.n.to_string(), fmt_f64(c.epsilon), fmt_f64(c.delta), c.q.kind().to_string()];
        let mut warnings = Vec::new();
        let row = match &entry.result {
            Ok(r) => {
                if let Some(note) = &r.note {
                    warnings.push(format!("n={}: {note}", entry.n));
                }
                if let Some(full) = &entry.full {
                    if full.rate_bound != r.rate_bound {
                        warnings.push(format!(
                            "n={}: windowed search gave {} but the full search gives {}",
                            entry.n, r.rate_bound, full.rate_bound
                        ));
                    }
                }
                let mut fields = head.to_vec();
                fields.extend([
                    r.diagnostics.backend.as_str().to_string(),
                    fmt_f64(r.t_opt),
                    fmt_f64(r.p_fail),
                    fmt_f64(r.rate_bound),
                    fmt_f64(r.log2_m_bound),
                    fmt_ms(if c.timing { r.wall_ms } else { 0.0 }),
                ]);
                Row { fields, error: None }
            }
            Err(e) => {
                let mut fields = head.to_vec();
                fields.extend([c.dp.backend.as_str().to_string(), String::new(), String::new(), String::new(), String::new(), fmt_ms(0.0)]);
                Row { fields, error: Some(e.to_string()) }
            }
        };
        (row, warnings)
    }

    /// Computes (or fetches) one row. Returns the row, whether it came from
    /// the cache, and warnings.
    fn one(&self, n: usize, history: &[(f64, f64)]) -> CliResult<(Row, bool, Vec<String>)> {
        let windowed = self.cfg.search.windowed;
        let key = self.key(n, windowed.then_some(history));
        if let Some(cache) = &self.cfg.cache {
            if let Some(fields) = cache.get(&key) {
                if fields.len() == CONVERSE_HEADER.len() {
                    return Ok((Row { fields, error: None }, true, Vec::new()));
                }
            }
        }
        let query = BoundQuery { n, ..self.base.clone() };
        let entry = sweep_entry(&self.dmc, &query, if windowed { history } else { &[] });
        let (row, warnings) = self.row(&entry);
        if let (Some(cache), None) = (&self.cfg.cache, &row.error) {
            cache.put(&key, &row.fields)?;
        }
        Ok((row, false, warnings))
    }
}

/// `(n, T_opt)` from a finished row, if its bound is finite.
fn fitted_point(row: &Row) -> Option<(f64, f64)> {
    if row.error.is_some() {
        return None;
    }
    let n: f64 = row.fields[0].parse().ok()?;
    let t: f64 = row.fields[5].parse().ok()?;
    let rate: f64 = row.fields[7].parse().ok()?;
    rate.is_finite().then_some((n, t))
}

pub fn run_converse(cfg: &ConverseConfig) -> CliResult<Outcome> {
    check_epsilon(cfg.epsilon)?;
    let dmc = cfg.channel.build()?;
    let q = cfg.q.resolve(&dmc)?;
    let base = BoundQuery {
        n: 1,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        q,
        dp: cfg.dp,
        search: cfg.search.clone(),
    };
    base.validate()?;
    let ctx = ConverseContext {
        cfg,
        channel_hash: sha256_hex(to_json(&dmc).as_bytes()),
        dmc,
        base,
    };

    let mut out = Outcome::default();
    let mut rows = Vec::with_capacity(cfg.n.len());
    let tally = |out: &mut Outcome, row: &Row, cached: bool, warnings: Vec<String>| {
        if row.error.is_some() {
            out.failures += 1;
        } else if cached {
            out.cached += 1;
        } else {
            out.computed += 1;
        }
        out.warnings.extend(warnings);
    };
    if cfg.search.windowed {
        // each window depends on the entries before it
        let mut history = Vec::new();
        for &n in &cfg.n {
            let (row, cached, warnings) = ctx.one(n, &history)?;
            history.extend(fitted_point(&row));
            tally(&mut out, &row, cached, warnings);
            rows.push(row);
        }
    } else {
        let results: Vec<CliResult<(Row, bool, Vec<String>)>> = cfg.n.par_iter().map(|&n| ctx.one(n, &[])).collect();
        for r in results {
            let (row, cached, warnings) = r?;
            tally(&mut out, &row, cached, warnings);
            rows.push(row);
        }
    }
    out.output = write_csv(&CONVERSE_HEADER, &rows)?;
    Ok(out)
}

/// What a baseline is evaluated for.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineTarget {
    Bsc(f64),
    Bec(f64),
    Rc { channel: ChannelSpec, input: InputSelector, options: RcOptions },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSelector {
    /// Capacity-achieving input from Blahut-Arimoto.
    Ca,
    Uniform,
}

impl BaselineTarget {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineTarget::Bsc(_) => BaselineKind::BscConverse,
            BaselineTarget::Bec(_) => BaselineKind::BecConverse,
            BaselineTarget::Rc { .. } => BaselineKind::RcAchievability,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub target: BaselineTarget,
    pub epsilon: f64,
    pub n: Vec<usize>,
    pub timing: bool,
    pub cache: Option<Cache>,
}

enum Prepared {
    Bsc(f64),
    Bec(f64),
    Rc { dmc: Dmc, g: InputDist, options: RcOptions },
}

pub fn run_baseline(cfg: &BaselineConfig) -> CliResult<Outcome> {
    check_epsilon(cfg.epsilon)?;
    let kind = cfg.target.kind();
    let mut key = KeyBuilder::new("baseline");
    key.text("kind", kind.as_str()).float("epsilon", cfg.epsilon).text("timing", &cfg.timing.to_string());
    let prepared = match &cfg.target {
        BaselineTarget::Bsc(p) => {
            key.float("p", *p);
            Prepared::Bsc(*p)
        }
        BaselineTarget::Bec(p) => {
            key.float("pe", *p);
            Prepared::Bec(*p)
        }
        BaselineTarget::Rc { channel, input, options } => {
            let dmc = channel.build()?;
            let g = match input {
                InputSelector::Ca => capacity_input(&dmc)?,
                InputSelector::Uniform => InputDist::uniform(dmc.num_inputs())?,
            };
            if !(options.delta > 0.0 && options.delta.is_finite()) {
                return Err(CliError::Config(format!("rc grid step must be positive, got {}", options.delta)));
            }
            key.text("channel", &sha256_hex(to_json(&dmc).as_bytes()))
                .floats("g", g.probs())
                .float("rc_delta", options.delta)
                .int("rc_max_bins", options.max_bins as u64)
                .float("rc_prune", options.prune_budget);
            Prepared::Rc { dmc, g, options: *options }
        }
    };
    // parameter errors surface once, as configuration errors
    let probe = match &prepared {
        Prepared::Bsc(p) => bsc_converse(1, *p, cfg.epsilon).map(|_| ()),
        Prepared::Bec(p) => bec_converse(1, *p, cfg.epsilon).map(|_| ()),
        Prepared::Rc { .. } => Ok(()),
    };
    probe?;

    let results: Vec<CliResult<(Row, bool)>> = cfg
        .n
        .par_iter()
        .map(|&n| {
            let mut k = key.clone();
            let k = k.int("n", n as u64).digest();
            if let Some(fields) = cfg.cache.as_ref().and_then(|c| c.get(&k)) {
                if fields.len() == BASELINE_HEADER.len() {
                    return Ok((Row { fields, error: None }, true));
                }
            }
            let t0 = std::time::Instant::now();
            let rate = match &prepared {
                Prepared::Bsc(p) => bsc_converse(n, *p, cfg.epsilon),
                Prepared::Bec(p) => bec_converse(n, *p, cfg.epsilon),
                Prepared::Rc { dmc, g, options } => rc_achievability(dmc, g, n, cfg.epsilon, options),
            };
            let ms = if cfg.timing { t0.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            let head = [n.to_string(), fmt_f64(cfg.epsilon), kind.as_str().to_string()];
            let row = match rate {
                Ok(r) => {
                    let mut fields = head.to_vec();
                    fields.extend([fmt_f64(r), fmt_ms(ms)]);
                    if let Some(c) = &cfg.cache {
                        c.put(&k, &fields)?;
                    }
                    Row { fields, error: None }
                }
                Err(e) => {
                    let mut fields = head.to_vec();
                    fields.extend([String::new(), fmt_ms(ms)]);
                    Row { fields, error: Some(e.to_string()) }
                }
            };
            Ok((row, false))
        })
        .collect();
    let mut out = Outcome::default();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let (row, cached) = r?;
        if row.error.is_some() {
            out.failures += 1;
        } else if cached {
            out.cached += 1;
        } else {
            out.computed += 1;
        }
        rows.push(row);
    }
    out.output = write_csv(&BASELINE_HEADER, &rows)?;
    Ok(out)
}

/// Channel file for a quantized AWGN specification. The text is checked to
/// parse back to the same matrix.
pub fn run_channel_build(spec: &AwgnQuantSpec) -> CliResult<String> {
    let dmc = quantized_awgn(spec)?;
    let text = to_json(&dmc);
    let back = parse_channel(&text)?;
    if back.to_rows() != dmc.to_rows() {
        return Err(CliError::Config("channel file does not round-trip".into()));
    }
    Ok(text)
}

#[derive(Debug, Clone, Default)]
pub struct PlotConfig {
    pub inputs: Vec<PathBuf>,
    pub converse: Option<ConverseConfig>,
    pub baselines: Vec<BaselineConfig>,
}

pub fn run_plotdata(cfg: &PlotConfig) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let mut points: Vec<PlotPoint> = Vec::new();
    for path in &cfg.inputs {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        points.extend(parse_results_csv(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?);
    }
    if let Some(c) = &cfg.converse {
        let o = run_converse(c)?;
        points.extend(parse_results_csv(&o.output)?);
        out.absorb(&o);
    }
    for b in &cfg.baselines {
        let o = run_baseline(b)?;
        points.extend(parse_results_csv(&o.output)?);
        out.absorb(&o);
    }
    out.output = write_plot_csv(points)?;
    Ok(out)
}

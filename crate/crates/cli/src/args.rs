//! Command-line flags and their translation into command configurations.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dpconverse::baselines::{RcOptions, RC_DEFAULT_DELTA};
use dpconverse::bound::{SearchConfig, SearchStrategy};
use dpconverse::channel::file::to_json;
use dpconverse::channel::{blahut_arimoto, AwgnQuantSpec, BA_DEFAULT_MAX_ITER, BA_DEFAULT_TOL};
use dpconverse::density::DEFAULT_DELTA;
use dpconverse::dp::{Backend, DpOptions, DEFAULT_MAX_BINS};
use dpconverse::kernel::BoundaryPolicy;

use crate::cache::Cache;
use crate::commands::{
    run_baseline, run_channel_build, run_converse, run_plotdata, BaselineConfig, BaselineTarget, ConverseConfig,
    InputSelector, Outcome, PlotConfig,
};
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::spec::{parse_n_range, parse_number_list, ChannelSpec};

pub const ENV_WORKERS: &str = "DPCONVERSE_WORKERS";
pub const ENV_CACHE_DIR: &str = "DPCONVERSE_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(name = "dpconverse", version, about = "Finite-blocklength converse bounds for DMCs with feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Converse bound for each blocklength.
    Converse(ConverseOpts),
    /// Reference bounds: BSC/BEC converses and random-coding achievability.
    Baseline(BaselineOpts),
    /// Channel files.
    #[command(subcommand)]
    Channel(ChannelCmd),
    /// Long-format `n,series,rate_bits` data merged from result files and/or
    /// computed runs.
    Plotdata(PlotOpts),
}

#[derive(Debug, Clone, Args)]
pub struct CommonOpts {
    /// Worker threads (default: $DPCONVERSE_WORKERS, else one per core).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Result cache directory (default: $DPCONVERSE_CACHE_DIR; no cache if unset).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Ignore any configured cache.
    #[arg(long)]
    pub no_cache: bool,
    /// Write wall_ms as 0 so repeated runs are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DpOpts {
    /// bsc:p, bec:p, bac:p1,p2, identity:k, awgn-fixture, awgn-fit or file:path.
    #[arg(long)]
    pub channel: String,
    #[arg(long)]
    pub eps: f64,
    /// Bin width in bits.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Blocklengths: a list `100,200`, a range `start:stop[:step]`, or both.
    #[arg(long, allow_hyphen_values = true)]
    pub n: String,
    /// Output distribution: ca, uniform or file:path (JSON array).
    #[arg(long, default_value = "ca")]
    pub q: String,
    /// fft, sparse or auto.
    #[arg(long, default_value = "auto")]
    pub backend: String,
    /// Out-of-grid reads: zero or saturate (sparse backend only).
    #[arg(long, default_value = "zero")]
    pub boundary: String,
    #[arg(long, default_value_t = DEFAULT_MAX_BINS)]
    pub max_bins: usize,
    /// Threshold search: scan (all boundaries, one DP) or bracket.
    #[arg(long, default_value = "scan")]
    pub search: String,
    #[arg(long, default_value_t = 64)]
    pub coarse_count: usize,
    #[arg(long, default_value_t = 8)]
    pub refine_count: usize,
    #[arg(long, default_value_t = 3.0)]
    pub window_scale: f64,
    #[arg(long, default_value_t = 50)]
    pub window_floor: i64,
    /// Search every blocklength over the full candidate range.
    #[arg(long)]
    pub no_window: bool,
    /// Also run the full search for windowed entries and warn on mismatch.
    #[arg(long)]
    pub validate_window: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ConverseOpts {
    #[command(flatten)]
    pub dp: DpOpts,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKindArg {
    BscConverse,
    BecConverse,
    Rc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputArg {
    Ca,
    Uniform,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineParams {
    /// BSC crossover or BEC erasure probability.
    #[arg(long)]
    pub p: Option<f64>,
    /// BEC erasure probability.
    #[arg(long)]
    pub pe: Option<f64>,
    /// Random-coding input distribution.
    #[arg(long, value_enum, default_value_t = InputArg::Ca)]
    pub input_dist: InputArg,
    /// Random-coding grid step in bits.
    #[arg(long, default_value_t = RC_DEFAULT_DELTA)]
    pub rc_delta: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineOpts {
    #[arg(value_enum)]
    pub kind: BaselineKindArg,
    #[arg(long)]
    pub channel: Option<String>,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub n: String,
    #[command(flatten)]
    pub params: BaselineParams,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Debug, Subcommand)]
pub enum ChannelCmd {
    /// Quantized AWGN channel file from a constellation and thresholds.
    Build(BuildOpts),
    /// Validates a channel and prints its size and capacity.
    Check {
        #[arg(long)]
        channel: String,
    },
}

#[derive(Debug, Clone, Args)]
pub struct BuildOpts {
    /// The fitted 8-point constellation and 7 thresholds.
    #[arg(long, conflicts_with_all = ["points", "thresholds"])]
    pub fitted: bool,
    /// Comma-separated constellation points.
    #[arg(long, allow_hyphen_values = true)]
    pub points: Option<String>,
    /// Comma-separated increasing thresholds.
    #[arg(long, allow_hyphen_values = true)]
    pub thresholds: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub noise_std: f64,
    #[arg(long)]
    pub amplitude_limit: Option<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotOpts {
    /// Existing converse, baseline or plot CSV files.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    /// Channel to compute a converse series for.
    #[arg(long)]
    pub channel: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub n: Option<String>,
    #[arg(long, default_value = "ca")]
    pub q: String,
    #[arg(long, default_value = "auto")]
    pub backend: String,
    /// Baseline series to compute alongside (repeatable).
    #[arg(long = "baseline", value_enum)]
    pub baselines: Vec<BaselineKindArg>,
    #[command(flatten)]
    pub params: BaselineParams,
    #[command(flatten)]
    pub common: CommonOpts,
}

fn config<T: std::str::FromStr>(s: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| CliError::Config(e.to_string()))
}

fn resolve_workers(flag: Option<usize>) -> CliResult<usize> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var(ENV_WORKERS) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{ENV_WORKERS}='{v}' is not a non-negative integer"))),
        _ => Ok(0),
    }
}

fn resolve_cache(common: &CommonOpts) -> CliResult<Option<Cache>> {
    if common.no_cache {
        return Ok(None);
    }
    let dir = common
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os(ENV_CACHE_DIR).filter(|v| !v.is_empty()).map(PathBuf::from));
    dir.map(|d| Cache::open(&d)).transpose()
}

fn converse_config(dp: &DpOpts, common: &CommonOpts) -> CliResult<ConverseConfig> {
    let strategy: SearchStrategy = config(&dp.search)?;
    let boundary = match dp.boundary.as_str() {
        "zero" => BoundaryPolicy::Zero,
        "saturate" => BoundaryPolicy::Saturate,
        other => return Err(CliError::Config(format!("unknown boundary policy '{other}'"))),
    };
    Ok(ConverseConfig {
        channel: config(&dp.channel)?,
        epsilon: dp.eps,
        delta: dp.delta,
        n: parse_n_range(&dp.n)?,
        q: config(&dp.q)?,
        dp: DpOptions {
            backend: config::<Backend>(&dp.backend)?,
            boundary,
            max_bins: dp.max_bins,
        },
        search: SearchConfig {
            strategy,
            coarse_count: dp.coarse_count,
            refine_count: dp.refine_count,
            window_scale: dp.window_scale,
            window_floor: dp.window_floor,
            validate_window: dp.validate_window,
            windowed: !dp.no_window,
        },
        timing: !common.no_timing,
        cache: resolve_cache(common)?,
    })
}

fn baseline_target(kind: BaselineKindArg, channel: Option<&str>, params: &BaselineParams) -> CliResult<BaselineTarget> {
    let spec: Option<ChannelSpec> = channel.map(config).transpose()?;
    match kind {
        BaselineKindArg::BscConverse => match (params.p, &spec) {
            (Some(p), _) => Ok(BaselineTarget::Bsc(p)),
            (None, Some(ChannelSpec::Bsc(p))) => Ok(BaselineTarget::Bsc(*p)),
            _ => Err(CliError::Config("bsc-converse needs --p or a bsc:p channel".into())),
        },
        BaselineKindArg::BecConverse => match (params.pe.or(params.p), &spec) {
            (Some(p), _) => Ok(BaselineTarget::Bec(p)),
            (None, Some(ChannelSpec::Bec(p))) => Ok(BaselineTarget::Bec(*p)),
            _ => Err(CliError::Config("bec-converse needs --pe or a bec:p channel".into())),
        },
        BaselineKindArg::Rc => {
            let channel = spec.ok_or_else(|| CliError::Config("rc needs --channel".into()))?;
            Ok(BaselineTarget::Rc {
                channel,
                input: match params.input_dist {
                    InputArg::Ca => InputSelector::Ca,
                    InputArg::Uniform => InputSelector::Uniform,
                },
                options: RcOptions { delta: params.rc_delta, ..RcOptions::default() },
            })
        }
    }
}

fn build_spec(opts: &BuildOpts) -> CliResult<AwgnQuantSpec> {
    if opts.fitted {
        return Ok(AwgnQuantSpec::fitted_eight_level());
    }
    let points = opts
        .points
        .as_deref()
        .ok_or_else(|| CliError::Config("channel build needs --fitted or --points".into()))?;
    Ok(AwgnQuantSpec {
        points: parse_number_list(points, "point")?,
        thresholds: parse_number_list(opts.thresholds.as_deref().unwrap_or(""), "threshold")?,
        noise_std: opts.noise_std,
        amplitude_limit: opts.amplitude_limit,
    })
}

fn emit(text: &str, out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e))
        }
    }
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(workers)?)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    pool.install(f)
}

fn finish(outcome: Outcome, out: Option<&PathBuf>) -> CliResult<i32> {
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    emit(&outcome.output, out)?;
    if outcome.failures > 0 {
        eprintln!("error: {} row(s) failed; see the error column", outcome.failures);
    }
    Ok(outcome.exit_code())
}

/// Runs a parsed command line; returns the process exit status.
pub fn execute(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Converse(o) => {
            let cfg = converse_config(&o.dp, &o.common)?;
            let outcome = in_pool(o.common.workers, || run_converse(&cfg))?;
            finish(outcome, o.common.out.as_ref())
        }
        Command::Baseline(o) => {
            let cfg = BaselineConfig {
                target: baseline_target(o.kind, o.channel.as_deref(), &o.params)?,
                epsilon: o.eps,
                n: parse_n_range(&o.n)?,
                timing: !o.common.no_timing,
                cache: resolve_cache(&o.common)?,
            };
            let outcome = in_pool(o.common.workers, || run_baseline(&cfg))?;
            finish(outcome, o.common.out.as_ref())
        }
        Command::Channel(ChannelCmd::Build(o)) => {
            let text = run_channel_build(&build_spec(&o)?)?;
            emit(&text, o.out.as_ref())?;
            Ok(EXIT_OK)
        }
        Command::Channel(ChannelCmd::Check { channel }) => {
            let dmc = config::<ChannelSpec>(&channel)?.build()?;
            let cap = blahut_arimoto(&dmc, BA_DEFAULT_TOL, BA_DEFAULT_MAX_ITER)?;
            let text = format!(
                "inputs: {}\noutputs: {}\ncapacity_bits: {}\ncapacity_input: {:?}\nfile_bytes: {}\n",
                dmc.num_inputs(),
                dmc.num_outputs(),
                cap.bits,
                cap.input.probs(),
                to_json(&dmc).len()
            );
            emit(&text, None)?;
            Ok(EXIT_OK)
        }
        Command::Plotdata(o) => {
            let timing = !o.common.no_timing;
            let cache = resolve_cache(&o.common)?;
            let mut cfg = PlotConfig { inputs: o.inputs.clone(), ..PlotConfig::default() };
            if let Some(channel) = &o.channel {
                let eps = o.eps.ok_or_else(|| CliError::Config("plotdata with --channel needs --eps".into()))?;
                let n = o.n.as_deref().ok_or_else(|| CliError::Config("plotdata with --channel needs --n".into()))?;
                let dp = DpOpts {
                    channel: channel.clone(),
                    eps,
                    delta: o.delta,
                    n: n.to_string(),
                    q: o.q.clone(),
                    backend: o.backend.clone(),
                    boundary: "zero".into(),
                    max_bins: DEFAULT_MAX_BINS,
                    search: "scan".into(),
                    coarse_count: 64,
                    refine_count: 8,
                    window_scale: 3.0,
                    window_floor: 50,
                    no_window: false,
                    validate_window: false,
                };
                cfg.converse = Some(converse_config(&dp, &o.common)?);
                for &kind in &o.baselines {
                    cfg.baselines.push(BaselineConfig {
                        target: baseline_target(kind, Some(channel), &o.params)?,
                        epsilon: eps,
                        n: parse_n_range(n)?,
                        timing,
                        cache: cache.clone(),
                    });
                }
            } else if !o.baselines.is_empty() {
                return Err(CliError::Config("--baseline needs --channel".into()));
            } else if o.inputs.is_empty() {
                return Err(CliError::Config("plotdata needs --input files or --channel".into()));
            }
            let outcome = in_pool(o.common.workers, || run_plotdata(&cfg))?;
            finish(outcome, o.common.out.as_ref())
        }
    }
}

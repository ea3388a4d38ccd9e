//! Parsers for the small command-line languages: channel specs, blocklength
//! ranges and output-distribution selectors.

use std::path::PathBuf;
use std::str::FromStr;

use dpconverse::channel::file::parse_channel;
use dpconverse::channel::{
    awgn_fixture, bac, bec, blahut_arimoto, bsc, ca_output_dist, identity, quantized_awgn, AwgnQuantSpec, Dmc,
    InputDist, OutputDist, BA_DEFAULT_MAX_ITER, BA_DEFAULT_TOL,
};

use crate::error::{CliError, CliResult};

/// Upper limit on the number of blocklengths one range may expand to.
pub const MAX_N_COUNT: usize = 100_000;

/// Largest `identity:k` accepted; the matrix is stored densely.
pub const MAX_IDENTITY: usize = 4096;

/// Largest accepted blocklength.
pub const MAX_N: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    Bsc(f64),
    Bec(f64),
    Bac(f64, f64),
    Identity(usize),
    /// The two-decimal 8x8 fixture matrix.
    AwgnFixture,
    /// The 8x8 matrix rebuilt from the fitted constellation.
    AwgnFit,
    File(PathBuf),
}

fn number(s: &str, what: &str) -> CliResult<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Config(format!("{what}: '{s}' is not a finite number")))
}

impl FromStr for ChannelSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        fn need<'a>(name: &str, a: Option<&'a str>) -> CliResult<&'a str> {
            a.ok_or_else(|| CliError::Config(format!("channel '{name}' needs parameters")))
        }
        let none = |a: Option<&str>| match a {
            Some(_) => Err(CliError::Config(format!("channel '{name}' takes no parameters"))),
            None => Ok(()),
        };
        match name {
            "bsc" => Ok(ChannelSpec::Bsc(number(need(name, arg)?, "bsc crossover")?)),
            "bec" => Ok(ChannelSpec::Bec(number(need(name, arg)?, "bec erasure probability")?)),
            "bac" => {
                let a = need(name, arg)?;
                let (p1, p2) = a
                    .split_once(',')
                    .ok_or_else(|| CliError::Config(format!("bac needs two crossovers 'p1,p2', got '{a}'")))?;
                Ok(ChannelSpec::Bac(number(p1, "bac p1")?, number(p2, "bac p2")?))
            }
            "identity" => {
                let a = need(name, arg)?;
                let k = a
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("identity size '{a}' is not a positive integer")))?;
                if k > MAX_IDENTITY {
                    return Err(CliError::Config(format!("identity size {k} exceeds {MAX_IDENTITY}")));
                }
                Ok(ChannelSpec::Identity(k))
            }
            "awgn-fixture" => none(arg).map(|_| ChannelSpec::AwgnFixture),
            "awgn-fit" => none(arg).map(|_| ChannelSpec::AwgnFit),
            "file" => {
                let a = need(name, arg)?;
                if a.is_empty() {
                    return Err(CliError::Config("file channel needs a path".into()));
                }
                Ok(ChannelSpec::File(PathBuf::from(a)))
            }
            other => Err(CliError::Config(format!(
                "unknown channel '{other}' (expected bsc:p, bec:p, bac:p1,p2, identity:k, awgn-fixture, awgn-fit or file:path)"
            ))),
        }
    }
}

impl ChannelSpec {
    pub fn build(&self) -> CliResult<Dmc> {
        let dmc = match self {
            ChannelSpec::Bsc(p) => bsc(*p)?,
            ChannelSpec::Bec(p) => bec(*p)?,
            ChannelSpec::Bac(p1, p2) => bac(*p1, *p2)?,
            ChannelSpec::Identity(k) => identity(*k)?,
            ChannelSpec::AwgnFixture => awgn_fixture(),
            ChannelSpec::AwgnFit => quantized_awgn(&AwgnQuantSpec::fitted_eight_level())?,
            ChannelSpec::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                parse_channel(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
        };
        Ok(dmc)
    }
}

/// Parses `"300"`, `"100,200,300"`, `"100:300:100"` (inclusive stop, step
/// defaults to 1) or comma-separated mixtures into a sorted, deduplicated
/// list. An empty string gives an empty list.
pub fn parse_n_range(s: &str) -> CliResult<Vec<usize>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
        let int = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("blocklength '{t}' is not a non-negative integer")))
        };
        let parts: Vec<&str> = item.split(':').collect();
        let (start, stop, step) = match parts.as_slice() {
            [one] => {
                let v = int(one)?;
                (v, v, 1)
            }
            [a, b] => (int(a)?, int(b)?, 1),
            [a, b, c] => (int(a)?, int(b)?, int(c)?),
            _ => return Err(CliError::Config(format!("range '{item}' is not start:stop[:step]"))),
        };
        if start == 0 {
            return Err(CliError::Config(format!("blocklengths start at 1, got '{item}'")));
        }
        if step == 0 {
            return Err(CliError::Config(format!("range '{item}' has step 0")));
        }
        if stop < start {
            return Err(CliError::Config(format!("range '{item}' stops before it starts")));
        }
        if stop > MAX_N {
            return Err(CliError::Config(format!("blocklength {stop} exceeds the limit {MAX_N}")));
        }
        let count = (stop - start) / step + 1;
        if out.len() + count > MAX_N_COUNT {
            return Err(CliError::Config(format!("more than {MAX_N_COUNT} blocklengths requested")));
        }
        out.extend((start..=stop).step_by(step));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Output distribution used by the converse.
#[derive(Debug, Clone, PartialEq)]
pub enum QSelector {
    /// Output distribution of a capacity-achieving input.
    Ca,
    Uniform,
    /// JSON array of probabilities.
    File(PathBuf),
}

impl FromStr for QSelector {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "ca" => Ok(QSelector::Ca),
            "uniform" => Ok(QSelector::Uniform),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(QSelector::File(PathBuf::from(p))),
                _ => Err(CliError::Config(format!("unknown Q selector '{s}' (expected ca, uniform or file:path)"))),
            },
        }
    }
}

impl QSelector {
    pub fn kind(&self) -> &'static str {
        match self {
            QSelector::Ca => "ca",
            QSelector::Uniform => "uniform",
            QSelector::File(_) => "file",
        }
    }

    pub fn resolve(&self, dmc: &Dmc) -> CliResult<OutputDist> {
        let q = match self {
            QSelector::Ca => ca_output_dist(dmc, &capacity_input(dmc)?)?,
            QSelector::Uniform => OutputDist::uniform(dmc.num_outputs())?,
            QSelector::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let v: Vec<f64> = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: expected a JSON array of probabilities: {e}", path.display())))?;
                if v.len() != dmc.num_outputs() {
                    return Err(CliError::Config(format!(
                        "{}: Q has {} entries, channel has {} outputs",
                        path.display(),
                        v.len(),
                        dmc.num_outputs()
                    )));
                }
                OutputDist::new(v)?
            }
        };
        q.check_against(dmc)?;
        Ok(q)
    }
}

pub fn capacity_input(dmc: &Dmc) -> CliResult<InputDist> {
    Ok(blahut_arimoto(dmc, BA_DEFAULT_TOL, BA_DEFAULT_MAX_ITER)?.input)
}

/// Comma-separated list of finite numbers.
pub fn parse_number_list(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| number(t, what)).collect()
}

//! CSV schemas for converse results, baseline results and plot data.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! value read back parses to the same `f64`. Infinite bounds are written as
//! `inf`. An `error` column is appended only when some row failed.

use crate::error::{CliError, CliResult};

pub const CONVERSE_HEADER: [&str; 10] = [
    "n",
    "epsilon",
    "delta",
    "q_kind",
    "backend",
    "T_opt",
    "p_fail",
    "rate_bound_bits",
    "log2M_bound",
    "wall_ms",
];

pub const BASELINE_HEADER: [&str; 5] = ["n", "epsilon", "kind", "rate_bits", "wall_ms"];

pub const PLOT_HEADER: [&str; 3] = ["n", "series", "rate_bits"];

/// Series name used for converse results in plot data.
pub const DPC_SERIES: &str = "dpc";

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_ms(ms: f64) -> String {
    format!("{ms:.3}")
}

/// One output row: the schema's fields, plus an error message for failed
/// rows (whose numeric fields are then empty).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub fields: Vec<String>,
    pub error: Option<String>,
}

pub fn write_csv(header: &[&str], rows: &[Row]) -> CliResult<String> {
    let with_error = rows.iter().any(|r| r.error.is_some());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let map = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    let mut head: Vec<&str> = header.to_vec();
    if with_error {
        head.push("error");
    }
    w.write_record(&head).map_err(map)?;
    for r in rows {
        let mut rec = r.fields.clone();
        if with_error {
            rec.push(r.error.clone().unwrap_or_default());
        }
        w.write_record(&rec).map_err(map)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Config(format!("csv: {e}")))
}

/// A point of the long-format plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub n: usize,
    pub series: String,
    pub rate_bits: f64,
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

/// Reads a converse, baseline or plot-data CSV into plot points. Failed rows
/// (non-empty `error`, empty rate) are skipped.
pub fn parse_results_csv(text: &str) -> CliResult<Vec<PlotPoint>> {
    let bad = |msg: String| CliError::Config(format!("results csv: {msg}"));
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let n_col = column(&headers, "n").ok_or_else(|| bad("no 'n' column".into()))?;
    let err_col = column(&headers, "error");
    enum Series {
        Fixed(&'static str),
        Column(usize),
    }
    let (series, rate_col) = if let Some(c) = column(&headers, "rate_bound_bits") {
        (Series::Fixed(DPC_SERIES), c)
    } else if let (Some(k), Some(c)) = (column(&headers, "kind"), column(&headers, "rate_bits")) {
        (Series::Column(k), c)
    } else if let (Some(s), Some(c)) = (column(&headers, "series"), column(&headers, "rate_bits")) {
        (Series::Column(s), c)
    } else {
        return Err(bad("unrecognized header".into()));
    };
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = i + 2;
        if err_col.and_then(|c| rec.get(c)).is_some_and(|e| !e.is_empty()) {
            continue;
        }
        let rate = rec.get(rate_col).unwrap_or("");
        if rate.is_empty() {
            continue;
        }
        let n = rec
            .get(n_col)
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| bad(format!("line {line}: bad blocklength")))?;
        let rate_bits = rate
            .parse::<f64>()
            .ok()
            .filter(|r| !r.is_nan())
            .ok_or_else(|| bad(format!("line {line}: bad rate '{rate}'")))?;
        let series = match series {
            Series::Fixed(s) => s.to_string(),
            Series::Column(c) => rec.get(c).unwrap_or("").to_string(),
        };
        if series.is_empty() {
            return Err(bad(format!("line {line}: empty series name")));
        }
        out.push(PlotPoint { n, series, rate_bits });
    }
    Ok(out)
}

/// Long-format plot CSV, sorted by series then blocklength.
pub fn write_plot_csv(mut points: Vec<PlotPoint>) -> CliResult<String> {
    points.sort_by(|a, b| a.series.cmp(&b.series).then(a.n.cmp(&b.n)));
    let rows: Vec<Row> = points
        .into_iter()
        .map(|p| Row {
            fields: vec![p.n.to_string(), p.series, fmt_f64(p.rate_bits)],
            error: None,
        })
        .collect();
    write_csv(&PLOT_HEADER, &rows)
}

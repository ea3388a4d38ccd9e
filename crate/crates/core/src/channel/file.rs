//! JSON channel file format.
//!
//! ```json
//! {
//!   "num_inputs": 2,
//!   "num_outputs": 2,
//!   "W": [[0.89, 0.11], [0.11, 0.89]],
//!   "input_labels": ["0", "1"],
//!   "output_labels": ["0", "1"],
//!   "row_tolerance": 1e-9
//! }
//! ```
//!
//! `input_labels`, `output_labels` and `row_tolerance` are optional. A
//! `row_tolerance` looser than the default renormalizes rows after they pass
//! validation.

use serde::{Deserialize, Serialize};

use super::{Dmc, DEFAULT_ROW_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    num_inputs: usize,
    num_outputs: usize,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    row_tolerance: Option<f64>,
}

pub fn parse_channel(text: &str) -> Result<Dmc> {
    let f: ChannelFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if f.w.len() != f.num_inputs {
        return Err(Error::Format(format!(
            "num_inputs is {} but W has {} rows",
            f.num_inputs,
            f.w.len()
        )));
    }
    if let Some((r, row)) = f.w.iter().enumerate().find(|(_, r)| r.len() != f.num_outputs) {
        return Err(Error::Format(format!(
            "num_outputs is {} but row {r} has {} entries",
            f.num_outputs,
            row.len()
        )));
    }
    let dmc = match f.row_tolerance {
        None => Dmc::new(f.w)?,
        Some(tol) if tol.is_finite() && tol >= DEFAULT_ROW_TOL && tol < 1.0 => {
            Dmc::with_tolerance(f.w, tol)?
        }
        Some(tol) => {
            return Err(Error::Format(format!(
                "row_tolerance {tol} must lie in [{DEFAULT_ROW_TOL}, 1)"
            )))
        }
    };
    dmc.with_labels(f.input_labels, f.output_labels)
}

pub fn to_json(dmc: &Dmc) -> String {
    let f = ChannelFile {
        num_inputs: dmc.num_inputs(),
        num_outputs: dmc.num_outputs(),
        w: dmc.to_rows(),
        input_labels: dmc.input_labels().map(<[String]>::to_vec),
        output_labels: dmc.output_labels().map(<[String]>::to_vec),
        row_tolerance: None,
    };
    let mut s = serde_json::to_string_pretty(&f).expect("channel serializes");
    s.push('\n');
    s
}

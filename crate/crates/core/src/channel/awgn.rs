use statrs::function::erf::erfc;

use super::Dmc;
use crate::error::{Error, Result};

/// A finite constellation sent over unit-variance-scaled Gaussian noise whose
/// output is quantized by a set of thresholds.
///
/// Output `i` (0-based) covers `(q_{i-1}, q_i]` with `q_{-1} = -inf` and
/// `q_{|Y|-1} = +inf`, so `thresholds.len() + 1` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AwgnQuantSpec {
    pub points: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub noise_std: f64,
    pub amplitude_limit: Option<f64>,
}

impl AwgnQuantSpec {
    /// Constellation and thresholds recovered by fitting to the two-decimal
    /// two-decimal 8x8 matrix; unit noise, amplitude limit 10.
    pub fn fitted_eight_level() -> Self {
        let mags = [1.4759, 4.1624, 6.6706, 9.9756];
        let ts = [2.8805, 5.389, 8.2255];
        let points = mags
            .iter()
            .rev()
            .map(|m| -m)
            .chain(mags.iter().copied())
            .collect();
        let thresholds = ts
            .iter()
            .rev()
            .map(|t| -t)
            .chain(std::iter::once(0.0))
            .chain(ts.iter().copied())
            .collect();
        Self {
            points,
            thresholds,
            noise_std: 1.0,
            amplitude_limit: Some(10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Quantizer("no constellation points".into()));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Quantizer(format!(
                "noise_std must be positive, got {}",
                self.noise_std
            )));
        }
        if let Some(p) = self.points.iter().find(|p| !p.is_finite()) {
            return Err(Error::Quantizer(format!("non-finite point {p}")));
        }
        if let Some(t) = self.thresholds.iter().find(|t| !t.is_finite()) {
            return Err(Error::Quantizer(format!("non-finite threshold {t}")));
        }
        if let Some(w) = self.thresholds.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Quantizer(format!(
                "thresholds not strictly increasing: {} >= {}",
                w[0], w[1]
            )));
        }
        if let Some(a) = self.amplitude_limit {
            if let Some(p) = self.points.iter().find(|p| p.abs() > a) {
                return Err(Error::Quantizer(format!(
                    "point {p} exceeds amplitude limit {a}"
                )));
            }
        }
        Ok(())
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `P(a < Z <= b)` for standard normal `Z`, evaluated on whichever tail
/// avoids cancellation.
fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// Builds `W(i|x) = Phi((q_i - x)/s) - Phi((q_{i-1} - x)/s)`.
pub fn quantized_awgn(spec: &AwgnQuantSpec) -> Result<Dmc> {
    spec.validate()?;
    let s = spec.noise_std;
    let rows = spec
        .points
        .iter()
        .map(|&x| {
            let edges: Vec<f64> = std::iter::once(f64::NEG_INFINITY)
                .chain(spec.thresholds.iter().map(|q| (q - x) / s))
                .chain(std::iter::once(f64::INFINITY))
                .collect();
            edges
                .windows(2)
                .map(|e| normal_interval(e[0], e[1]).max(0.0))
                .collect()
        })
        .collect();
    Dmc::new(rows)
}

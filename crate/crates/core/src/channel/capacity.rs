use super::{Dmc, InputDist};
use crate::error::{Error, Result};

pub const BA_DEFAULT_TOL: f64 = 1e-12;
pub const BA_DEFAULT_MAX_ITER: usize = 10_000;

/// Result of a Blahut-Arimoto run.
#[derive(Debug, Clone)]
pub struct Capacity {
    /// Capacity estimate in bits per channel use.
    pub bits: f64,
    pub input: InputDist,
    pub iterations: usize,
    /// Mutual information (bits) of the iterate after each update.
    pub trace: Vec<f64>,
}

/// `I(X;Y)` in bits for input distribution `g`.
pub fn mutual_information(dmc: &Dmc, g: &[f64]) -> f64 {
    let q = output_marginal(dmc, g);
    (0..dmc.num_inputs())
        .filter(|&x| g[x] > 0.0)
        .map(|x| g[x] * divergence_to(dmc, x, &q))
        .sum::<f64>()
        / std::f64::consts::LN_2
}

fn output_marginal(dmc: &Dmc, g: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; dmc.num_outputs()];
    for (x, &gx) in g.iter().enumerate() {
        for (qy, w) in q.iter_mut().zip(dmc.row(x)) {
            *qy += gx * w;
        }
    }
    q
}

/// `D(W(.|x) || q)` in nats.
fn divergence_to(dmc: &Dmc, x: usize, q: &[f64]) -> f64 {
    dmc.row(x)
        .iter()
        .zip(q)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, qy)| w * (w / qy).ln())
        .sum()
}

/// Blahut-Arimoto iteration starting from the uniform input. Stops once the
/// relative change of the mutual information falls below `tol`.
pub fn blahut_arimoto(dmc: &Dmc, tol: f64, max_iter: usize) -> Result<Capacity> {
    let k = dmc.num_inputs();
    let mut g = vec![1.0 / k as f64; k];
    let mut prev = mutual_information(dmc, &g);
    let mut trace = vec![prev];
    for it in 1..=max_iter {
        let q = output_marginal(dmc, &g);
        let mut z = 0.0;
        for (x, gx) in g.iter_mut().enumerate() {
            *gx *= divergence_to(dmc, x, &q).exp();
            z += *gx;
        }
        g.iter_mut().for_each(|gx| *gx /= z);
        let cur = mutual_information(dmc, &g);
        trace.push(cur);
        let change = (cur - prev).abs();
        if change == 0.0 || change <= tol * cur.abs() {
            return Ok(Capacity {
                bits: cur,
                input: InputDist::new(g)?,
                iterations: it,
                trace,
            });
        }
        prev = cur;
    }
    Err(Error::NoConvergence(max_iter))
}

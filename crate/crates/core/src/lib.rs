//! Finite-blocklength converse bounds for fixed-length codes with feedback
//! over discrete memoryless channels.
//!
//! The bound is computed by a backward dynamic program over a quantized
//! accumulated information density. Per-step round-up keeps the result a
//! valid upper bound on the optimal controller's success probability, and
//! hence a valid converse on the rate, for every threshold and every product
//! output distribution.
//!
//! Layout:
//!
//! - [`channel`]: channels, input/output distributions, Blahut-Arimoto, the
//!   JSON channel file format.
//! - [`density`]: information-density increments and the bin grid.
//! - [`kernel`]: per-input shift kernels, FFT and sparse products.
//! - [`dp`]: the backward recursion and the exact small-instance oracle.
//! - [`bound`]: the converse at a threshold, threshold search, sweeps.
//! - [`baselines`]: BSC/BEC converses and a random-coding achievability.

pub mod baselines;
pub mod bound;
pub mod channel;
pub mod density;
pub mod dp;
pub mod error;
pub mod kernel;

pub use error::{Error, Result};

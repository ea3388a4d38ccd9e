use thiserror::Error;

/// Errors raised while constructing channels or evaluating bounds.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("channel has an empty {0} alphabet")]
    EmptyAlphabet(&'static str),

    #[error("row {row} has {found} entries, expected {expected}")]
    RowLength {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("row {row}, column {col}: entry {value} is not a probability")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, deviation exceeds tolerance {tol}")]
    RowSum { row: usize, sum: f64, tol: f64 },

    #[error("{what}: {value} is outside [0, 1]")]
    ParameterRange { what: &'static str, value: f64 },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("output {output} is reachable but has zero probability under Q")]
    UnreachableOutput { output: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid AWGN quantizer: {0}")]
    Quantizer(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("bin width {delta} too coarse: grid would have {bins} bins")]
    GridTooCoarse { delta: f64, bins: i64 },

    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    ResourceCap {
        what: &'static str,
        needed: u64,
        cap: u64,
    },

    #[error("Blahut-Arimoto did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("channel file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

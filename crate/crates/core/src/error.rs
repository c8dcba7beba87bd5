use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (dimensions, non-skew matrices, bad indices, ...).
    #[error("input error: {0}")]
    Input(String),
    /// A computation produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// Lie closure exceeded the ambient algebra dimension without saturating.
    #[error("closure did not saturate: {0}")]
    Saturation(String),
    /// Orbit sampling could not produce enough points for the requested estimate.
    #[error("sampling error: {0}")]
    Sampling(String),
    /// Conflicting group assertions (e.g. an SE(n) system declared compact).
    #[error("assertion conflict: {0}")]
    Assertion(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid nuclear configuration: {0}")]
    InvalidConfig(String),

    #[error("Thomas-Fermi solver did not converge after {iterations} refinements (last change {last_change:e}, substeps {substeps})")]
    TfNonConvergence {
        iterations: usize,
        last_change: f64,
        substeps: usize,
    },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("angular momentum cascade exceeded the cap l = {cap}")]
    ChannelCap { cap: usize },

    #[error("j_z block cascade exceeded the cap |m| = {cap}")]
    BlockCap { cap: usize },

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("domain coverage failure: {0}")]
    Coverage(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

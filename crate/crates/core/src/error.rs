use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: resonator truncation must be at least 2, got {0}")]
    InvalidLayout(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error(
        "no real transfer time: resonant protocol requires equal couplings \
         (lambda_i = {lambda_i}, lambda_sq = {lambda_sq})"
    )]
    NoRealTransferTime { lambda_i: f64, lambda_sq: f64 },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("integration failed at t = {last_good_time} us: {reason}")]
    Integration { last_good_time: f64, reason: String },
}

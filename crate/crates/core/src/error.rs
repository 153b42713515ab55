use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {value} lies outside the domain [-1, 1]")]
    Domain { value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("rejection envelope violated: acceptance ratio {ratio} > 1 at {point:?}")]
    EnvelopeViolation { ratio: f64, point: Vec<f64> },

    #[error("{0} consecutive degenerate draws from the model class")]
    Degenerate(usize),

    #[error("variation function vanishes at {point:?}; weight undefined there")]
    ZeroVariation { point: Vec<f64> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("tensor with {entries} entries exceeds the dense limit of {limit}")]
    TooLarge { entries: usize, limit: usize },

    #[error("rank-deficient matrix: sigma_{rank} = {sigma:e}")]
    RankDeficient { rank: usize, sigma: f64 },

    #[error("construction failed: {0}")]
    Construction(String),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EnvelopeViolation { .. }
                | Error::Degenerate(_)
                | Error::ZeroVariation { .. }
                | Error::RankDeficient { .. }
                | Error::Construction(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

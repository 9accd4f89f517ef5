use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the profile domain {domain}")]
    Domain { point: Vec<f64>, domain: String },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("degenerate coefficient: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("eigensolver failed after {iterations} iterations: {detail}")]
    Solver { iterations: usize, detail: String },

    #[error("coefficient needs {required} continuous derivatives, profile provides {available}")]
    Smoothness { required: u32, available: u32 },

    #[error("grid touches a potential singularity at s = {0}")]
    Singularity(f64),

    #[error("precondition violated: {detail} (witness block ({row}, {col}))")]
    Precondition { detail: String, row: usize, col: usize },

    #[error("no admissible time for regularizer step {step}: {detail}")]
    NonMembership { step: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

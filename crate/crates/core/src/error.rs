use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is singular or not positive definite (min eigenvalue {0:.3e})")]
    Singular(f64),

    #[error("dressed-state labeling failed: {0}")]
    Labeling(String),

    #[error("block diagonalization is degenerate: {0}")]
    Degenerate(String),

    #[error("perturbative formula is singular at this detuning: {0}")]
    Pole(String),

    #[error("optimizer did not converge: {0}")]
    NoConvergence(String),

    #[error("non-physical state: {0}")]
    NonPhysical(String),

    #[error("invalid pulse sequence: {0}")]
    Sequence(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(format!("line {} column {}: {}", e.line(), e.column(), e))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

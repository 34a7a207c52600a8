use thiserror::Error;

/// Errors raised anywhere in the simulator or the receiver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("matrix is rank deficient (pivot ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("no active terminals; SNR is undefined")]
    NoActiveTerminals,

    #[error("sparse recovery exhausted its iteration budget of {budget}")]
    IterationBudgetExhausted { budget: usize },

    #[error("terminal {0} is not detected as active")]
    TerminalInactive(usize),

    #[error("index {0} is not in the recovered support")]
    IndexNotInSupport(usize),

    #[error("degenerate signal subspace (|e22| = {0:.3e})")]
    DegenerateSubspace(f64),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

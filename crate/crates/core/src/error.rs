use thiserror::Error;

/// Errors shared across the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violated a structural precondition (wrong arity, negative
    /// parameter, malformed specification).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two operands had incompatible dimensions.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Input was structurally valid but numerically degenerate for the
    /// requested operation (zero vector under normalization, all-identical
    /// training set, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Sampling produced no usable pairs: the domain collapses below the
    /// distinctness threshold.
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    /// The requested flag or parameter combination has no defined behavior.
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// A callable under estimation produced a non-finite value.
    #[error("non-finite value from evaluated function at sample {sample:?}")]
    NonFiniteEvaluation { sample: Vec<f64> },

    /// Training produced non-finite losses or gradients.
    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    /// Dataset or model serialization failed.
    #[error("serialization: {0}")]
    Serialization(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(format!("csv: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}

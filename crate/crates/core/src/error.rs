use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("statistic undefined: {0}")]
    UndefinedStatistic(String),

    #[error("sub-Poissonian marginal: {0}")]
    SubPoissonian(String),

    #[error("data are classical: {0}")]
    ClassicalData(String),

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("insufficient data: {found} shots, at least {required} required")]
    InsufficientData { required: u64, found: u64 },

    #[error("data inconsistent with the twin-beam model: {0}")]
    ModelMismatch(String),

    #[error("fit did not converge (best residual {residual:e})")]
    NonConvergence {
        residual: f64,
        best: Box<crate::reconstruct::ReconstructionResult>,
    },

    #[error(
        "cancellation error: estimated error {estimate:e} exceeds tolerance {tolerance:e} at index {index:?}"
    )]
    Precision {
        estimate: f64,
        tolerance: f64,
        index: (usize, usize),
    },

    #[error("series does not converge: boundary coefficient {boundary:e} at order {order}")]
    SingularResult { order: usize, boundary: f64 },

    #[error("grid does not cover the kernel support: {0}")]
    Coverage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaVersion { expected: String, found: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the supplied data rather than by how the tool was invoked.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::ParameterDomain(msg.into()))
}

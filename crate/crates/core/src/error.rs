use thiserror::Error;

pub type Result<T> = std::result::Result<T, GofError>;

#[derive(Debug, Error)]
pub enum GofError {
    #[error("dimension error: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("point {index} = {value} lies outside the hypothesis support [{lo}, {hi}]")]
    Domain {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("hypothesis cdf returned {value} at x = {x}, outside [0, 1]")]
    HypothesisIntegrity { x: f64, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid bin {index}: expectation {value} must be strictly positive")]
    InvalidBin { index: usize, value: f64 },

    #[error("binning policy error: {0}")]
    Policy(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("singular covariance matrix")]
    SingularCovariance,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("replica {replica}: {source}")]
    Replica {
        replica: u64,
        #[source]
        source: Box<GofError>,
    },

    #[error("resolution guard: {0}")]
    Resolution(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}:{line}: {message}")]
    EventFile {
        path: String,
        line: usize,
        message: String,
    },

    #[error("cache file: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GofError {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        GofError::Precondition(msg.into())
    }
}

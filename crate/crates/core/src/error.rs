use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient observations: need at least {needed}, got {got}")]
    InsufficientObservations { needed: usize, got: usize },
    #[error("not symmetric: max asymmetry {0:e}")]
    NotSymmetric(f64),
    #[error("not positive semidefinite: smallest eigenvalue {0:e}")]
    NotPositiveSemidefinite(f64),
    #[error("window exceeds series length ({window} > {len})")]
    WindowExceedsSeries { window: usize, len: usize },
    #[error("nonpositive value in series at index {0}")]
    NonpositiveValue(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("coefficient out of range: {0}")]
    CoefficientOutOfRange(f64),
    #[error("nonpositive variance: {0}")]
    NonpositiveVariance(f64),
    #[error("singular average covariance")]
    SingularAverageCovariance,
    #[error("degenerate covariance (zero total variance)")]
    DegenerateCovariance,
    #[error("grid mismatch")]
    GridMismatch,
    #[error("at least two populations required, got {0}")]
    TooFewPopulations(usize),
    #[error("truncation mass underflow")]
    TruncationMassUnderflow,
    #[error("integration failure: {0}")]
    IntegrationFailure(String),
    #[error("grid does not capture density mass (mass = {0})")]
    GridMassOutOfRange(f64),
    #[error("ratio undefined at t = {0}")]
    RatioUndefined(f64),
    #[error("observation count mismatch: {0} vs {1}")]
    ObservationCountMismatch(usize, usize),
    #[error("panel too small: {0} tickers survive cleaning")]
    PanelTooSmall(usize),
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

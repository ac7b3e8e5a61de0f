use thiserror::Error;

/// Errors raised by the statistical routines and the ingestion layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("too few observations: need at least {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("covariance matrix is degenerate (observations are collinear or identical)")]
    DegenerateCovariance,

    #[error("residual variance is zero")]
    ZeroResidualVariance,

    #[error("too few groups: need at least {needed}, got {got}")]
    TooFewGroups { needed: usize, got: usize },

    #[error("unit labels do not match across conditions: {0}")]
    LabelMismatch(String),

    #[error("within-group scatter matrix is singular")]
    SingularWithinScatter,

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("unit '{0}' has no observations")]
    EmptyUnit(String),

    #[error("design mismatch: {0}")]
    DesignMismatch(String),

    #[error("invalid adjacency graph: {0}")]
    InvalidGraph(String),

    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),

    #[error("series of {len} samples does not span a whole number of cycles ({cycles} cycles)")]
    NonIntegerCycles { len: usize, cycles: f64 },

    #[error("target frequency falls on bin {bin} of a {len}-point series and cannot be resolved")]
    FrequencyNotResolvable { bin: usize, len: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl StatsError {
    /// True when the input was well formed but the data do not meet a
    /// test's statistical preconditions.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            StatsError::TooFewObservations { .. }
                | StatsError::DegenerateCovariance
                | StatsError::ZeroResidualVariance
                | StatsError::TooFewGroups { .. }
                | StatsError::SingularWithinScatter
        )
    }
}

pub type Result<T> = std::result::Result<T, StatsError>;

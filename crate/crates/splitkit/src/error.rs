use thiserror::Error;

/// Errors shared by all solver modules.
#[derive(Debug, Error)]
pub enum SplitkitError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input contains non-finite entries")]
    NonFiniteInput,

    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("weight parameter must lie strictly inside (0, 1), got {0}")]
    InvalidTheta(f64),

    #[error("evaluation grid is empty")]
    EmptyGrid,

    #[error("order fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("error samples must be positive and finite")]
    InvalidErrorSample,

    #[error("step counts must be strictly increasing")]
    NonIncreasingSteps,

    #[error("operator norm estimation failed: {0}")]
    NormEstimation(String),

    #[error("no approximation level with m = {0}")]
    LevelNotFound(usize),

    #[error("approximation levels must have strictly increasing m")]
    NonIncreasingLevels(usize),

    #[error("step {step} is not aligned to the history grid (delta = {delta}); smallest compatible q is {suggested_q}")]
    GridAlignment {
        step: f64,
        delta: f64,
        suggested_q: usize,
    },

    #[error("history must have q + 1 >= 3 columns, got {0}")]
    HistoryTooShort(usize),

    #[error("initial history is incompatible with the head (defect {defect:.3e}); pass allow_incompatible to accept L1 data")]
    IncompatibleHistory { defect: f64 },

    #[error("generator does not produce a contraction semigroup: observed norm {0}")]
    ContractionCertificate(f64),

    #[error("declared delay-operator bound {declared} is below the measured value {measured}")]
    PhiBoundViolated { declared: f64, measured: f64 },

    #[error("problem parameter out of range: {0}")]
    BadProblemParameter(String),

    #[error("closed-form evaluation requires a structured generator")]
    ClosedFormUnavailable,
}

pub type Result<T> = std::result::Result<T, SplitkitError>;

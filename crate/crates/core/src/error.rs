use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability profile must contain at least one node")]
    EmptyProfile,

    #[error("probability profile has {0} nodes, the supported maximum is {max}", max = crate::pbdist::MAX_NODES)]
    ProfileTooLarge(usize),

    #[error("probability at index {index} is {value}, expected a value in [0, 1]")]
    InvalidProbability { index: usize, value: f64 },

    #[error("node index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("participant count {k} outside the model domain [0, {max}]")]
    OutOfDomain { k: f64, max: usize },

    #[error("polynomial degree {0} not supported (expected 0..=6)")]
    InvalidDegree(usize),

    #[error("need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no symmetric Nash equilibrium found")]
    NoEquilibrium,

    #[error("price of anarchy undefined: {0}")]
    UndefinedPoa(String),

    #[error(
        "training time {t_train} s exceeds the round deadline {t_round} s, contribution discarded"
    )]
    ContributionDiscarded { t_train: f64, t_round: f64 },

    #[error("calibration infeasible: {0}")]
    InfeasibleCalibration(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

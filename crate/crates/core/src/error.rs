use thiserror::Error;

/// Errors raised by the laboratory. Messages are part of the public contract
/// and are matched by tests and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative power on mean")]
    NegativePowerOnMean,
    #[error("integer Hölder order unsupported")]
    IntegerHolderOrder,
    #[error("mollifier under-resolved")]
    MollifierUnderResolved,
    #[error("time derivative needs at least 5 frames, got {0}")]
    TooFewFrames(usize),
    #[error("window longer than span")]
    WindowTooLong,
    #[error("germ not sewable at this resolution")]
    NotSewable,
    #[error("fBm covariance embedding not positive definite")]
    NotPositiveDefinite,
    #[error("only υ=1 driver implemented")]
    UnsupportedDriver,
    #[error("moment window shorter than one time unit")]
    WindowTooShort,
    #[error("no admissible β")]
    NoAdmissibleBeta,
    #[error("level infeasible at this grid")]
    LevelInfeasible,
    #[error("noise parameters not admissible: {0}")]
    Inadmissible(String),
    #[error("exponent pair outside the admissible regularity range")]
    OutsideRegularityRange,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}

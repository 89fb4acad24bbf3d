use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no triangulable landmark after {attempts} sampling attempts")]
    NoTriangulableLandmark { attempts: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("epsilon {epsilon} outside [e^-{kappa}, 1]")]
    EpsilonOutOfRange { epsilon: f64, kappa: usize },

    #[error("combination cap exceeded: {needed} evaluations requested, cap is {cap}")]
    CapExceeded { needed: u128, cap: u128 },

    #[error("bound inapplicable: {0}")]
    BoundUndefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

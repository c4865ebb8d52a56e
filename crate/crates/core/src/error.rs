use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis spec: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("fields live on different bases or grids")]
    BasisMismatch,

    #[error("level {level} exceeds n_max = {n_max}")]
    LevelOutOfRange { level: usize, n_max: usize },

    #[error("operation requires trap dimension {required}, basis has d = {got}")]
    Dimension { required: usize, got: usize },

    #[error("{what}: {got} quadrature nodes is below the exactness bound {required}")]
    QuadratureBound {
        what: &'static str,
        got: usize,
        required: usize,
    },

    #[error("non-finite state at t = {time}: {context}")]
    NonFinite { time: f64, context: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("clock mismatch: {0}")]
    ClockMismatch(String),

    #[error("wrap-around guard: {0}")]
    Wrap(String),

    #[error("cache format: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

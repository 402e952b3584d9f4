use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("discrete-only operation: {0} is a continuous law")]
    DiscreteOnly(String),

    #[error("compound representation unavailable: alpha = {alpha} exceeds 1 - p = {limit}")]
    CompoundUnavailable { alpha: f64, limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unstable intensity: lambda = {lambda} must lie below the service intensity mu = {mu}")]
    UnstableIntensity { lambda: f64, mu: f64 },

    #[error(
        "reversibility condition violated (residual {residual:e}); the stationary law is not \
         Ber-Geom in general, use markov_oracle instead"
    )]
    ConditionViolated { residual: f64 },

    #[error("unstable queue: mean service {service} does not exceed mean arrival {arrival}")]
    Unstable { arrival: f64, service: f64 },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("truncation too small: residual mass {mass:e} at K = {k}; increase K")]
    IncreaseK { k: usize, mass: f64 },

    #[error("invalid excursion: {0}")]
    InvalidExcursion(String),

    #[error("too many paths: {0} exceeds the enumeration limit")]
    TooManyPaths(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

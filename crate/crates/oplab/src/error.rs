use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("domain error: x = {x} outside [0, {l}]")]
    Domain { x: f64, l: f64 },

    #[error("quadrature did not reach tolerance {requested:.3e} (achieved {achieved:.3e})")]
    Accuracy { requested: f64, achieved: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix not positive definite: {0}")]
    NotPositive(String),

    #[error("operator near-singular: min |eigenvalue| = {min_eig:.3e} below threshold {threshold:.3e}")]
    Singular { min_eig: f64, threshold: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// An input lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A ray or plane construction has no solution.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Every LED of an access point measured zero gain.
    #[error("no signal received from access point {0}")]
    NoSignal(usize),

    /// The bearing rays do not determine a point.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A matrix that must be invertible was not.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

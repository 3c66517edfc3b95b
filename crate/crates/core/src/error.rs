use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unstable step at t = {t}: norm {norm} before renormalization is outside 1 +/- {tolerance}; reduce dt")]
    Instability { t: f64, norm: f64, tolerance: f64 },

    #[error("integrator instability: {0}")]
    Integrator(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}", config_message(*.line, .message))]
    Config { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn config_message(line: Option<usize>, message: &str) -> String {
    match line {
        Some(line) => format!("config line {line}: {message}"),
        None => format!("config: {message}"),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

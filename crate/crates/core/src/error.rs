use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular channel Gram matrix (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("adaptive allocation diverged at iteration {iteration} with step size mu = {mu}")]
    Divergence { mu: f64, iteration: usize },

    /// The plain gradient recursion has per-stream factor `1 - 2 mu q_m`,
    /// which is unstable once `mu >= 1 / max q_m`. The power rescale keeps
    /// such iterates bounded but they oscillate instead of converging.
    #[error("step size mu = {mu} is at or above the stability bound {bound:.4} of this channel")]
    UnstableStep { mu: f64, bound: f64 },

    #[error(
        "exhaustive search needs {points} grid points, above the limit of {limit}; use a coarser grid step"
    )]
    InfeasibleSearch { points: u128, limit: u128 },

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

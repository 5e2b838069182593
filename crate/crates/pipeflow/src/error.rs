//! Crate-wide error type.

/// Errors produced by geometry evaluation, solvers and scenario plumbing.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("nonlinear solve failed: {0}")]
    Solve(String),

    #[error("simulation aborted at t = {t}: {detail}")]
    Abort { t: f64, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

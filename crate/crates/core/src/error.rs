use thiserror::Error;

/// Failure modes shared across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("potential error: {0}")]
    Potential(String),
    #[error("eigensolver error: {0}")]
    Solver(String),
    #[error("multiplier error: {0}")]
    Multiplier(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("spectrum error: {0}")]
    Spectrum(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("profile error: {0}")]
    Profile(String),
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("ensemble error: {0}")]
    Ensemble(String),
    #[error("kernel of {entries} entries exceeds the budget of {budget}")]
    KernelBudget { entries: usize, budget: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Failures surfaced by model construction and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("symmetry violation: {0}")]
    Symmetry(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible scheme: {0}")]
    Infeasible(String),
    #[error("rank-deficient zero-forcing matrix (seed {seed}, trial {trial}, cluster {cluster})")]
    Singular { seed: u64, trial: u64, cluster: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than by numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Symmetry(_) | Error::Domain(_) | Error::Infeasible(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

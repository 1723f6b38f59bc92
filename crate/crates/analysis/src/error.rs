use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{0}")]
    Domain(String),
    #[error("overlap {overlap} is below the minimum {min}")]
    OverlapTooSmall { overlap: u64, min: u64 },
    /// The formula's stated guard does not hold.
    #[error("guard violated: {0}")]
    GuardFailed(String),
}

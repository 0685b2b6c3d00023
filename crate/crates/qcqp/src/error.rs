use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcqpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("problem data contains non-finite values")]
    NonFinite,
    #[error("problem is not convex: {0}")]
    NonConvex(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

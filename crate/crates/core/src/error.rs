use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("parameters outside regime: {0}")]
    Regime(String),
    #[error("code construction failed: {0}")]
    Construction(String),
    #[error("work budget exceeded: {0}")]
    Budget(String),
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("inconsistent plan: {0}")]
    PlanInconsistency(String),
    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),
    #[error("payload corruption at stripe {stripe}, node {node}")]
    Corruption { stripe: usize, node: usize },
}

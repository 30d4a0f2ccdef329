use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point lies outside the domain: {0}")]
    DomainViolation(String),

    #[error("gradient undefined at {0}")]
    UndefinedGradient(String),

    #[error("market depth undefined: {0}")]
    DepthUndefined(String),

    #[error("solver did not converge ({what}) after {iterations} iterations")]
    SolverFailure { what: String, iterations: usize },

    #[error("invalid outcome: {0}")]
    InvalidOutcome(String),

    #[error("outcome space cannot be enumerated: {0}")]
    EnumerationUnavailable(String),

    #[error("not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("bundle has negative entries but the market only sells positive bundles")]
    NegativeBundle,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("initial price condition violated: {0}")]
    InitialPrice(String),

    #[error("market already settled")]
    AlreadySettled,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn solver(what: impl Into<String>, iterations: usize) -> Self {
        Error::SolverFailure { what: what.into(), iterations }
    }

    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}

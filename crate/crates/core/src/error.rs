use thiserror::Error;

/// Errors surfaced by configuration validation and the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A session or operation parameter violates a stated invariant.
    /// The message names the violated invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An estimator was handed fewer samples than it needs.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    /// The Gaussian mutual-information estimator only applies when the
    /// attack fraction is 0 or 1; anything in between yields a mixture.
    #[error("attack fraction {0} is neither 0 nor 1: ledger is a Gaussian mixture")]
    MixtureAttack(f64),

    /// Input samples carry no usable spread (e.g. constant data).
    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    /// A slice scheme does not match the ledger it is applied to.
    #[error("scheme/ledger mismatch: {0}")]
    SchemeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

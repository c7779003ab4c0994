//! Error type shared across the library.

/// Errors raised by model assembly, factorizations and design optimization.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A Cholesky factorization failed; `minor` is the 1-based index of the
    /// first non-positive leading minor.
    #[error("matrix is not positive definite (leading minor {minor})")]
    NotPositiveDefinite { minor: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("model configuration error: {0}")]
    ModelConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dense limit exceeded: {what} = {value} exceeds limit {limit}")]
    DenseLimitExceeded {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("exhaustive search cap exceeded: C({d}, {r}) > {cap}")]
    SearchCapExceeded { d: usize, r: usize, cap: u64 },

    #[error("singular linear system in {0}")]
    SingularSystem(String),

    /// An EIG evaluation failed; carries the offending design.
    #[error("evaluation failed for design {design:?}: {source}")]
    EvaluationFailed {
        design: Vec<usize>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach a design to an evaluation error as it propagates out of the
    /// optimizer.
    pub fn for_design(self, design: &[usize]) -> Self {
        Error::EvaluationFailed {
            design: design.to_vec(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("invalid flag: {0}")]
    InvalidFlag(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("metric is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),
    #[error("invalid word: {0}")]
    InvalidWord(String),
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error("subspace is not invariant (residual {0:.3e})")]
    NotInvariant(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("tangent dimension {computed} differs from predicted {predicted}")]
    FormulaViolation { computed: usize, predicted: usize },
    #[error("quiver locus violated ({invariant}): {detail}")]
    Locus { invariant: &'static str, detail: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

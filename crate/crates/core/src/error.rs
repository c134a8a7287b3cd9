use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate configuration: atoms {0} and {1} closer than {2:e}")]
    Degenerate(usize, usize, f64),

    #[error("equilibrium search failed: {0}")]
    Search(String),

    #[error("rank-deficient design matrix; dependent monomials: {}", .0.join(", "))]
    Conditioning(Vec<String>),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("saddle: quadratic coefficient of {0} is {1}, expected > 0")]
    Saddle(String, f64),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

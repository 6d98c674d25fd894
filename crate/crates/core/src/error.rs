use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("atom count {atoms} does not match weight count {weights}")]
    LengthMismatch { atoms: usize, weights: usize },

    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sinkhorn overflow: epsilon {epsilon} is too small for cost scale {max_cost}")]
    SinkhornOverflow { epsilon: f64, max_cost: f64 },

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("network simplex failed: {0}")]
    NetworkSimplex(&'static str),

    #[error("synthetic generation failed: {0}")]
    Generation(String),

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

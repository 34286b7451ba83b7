use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frame is not Parseval (bounds A = {lower}, B = {upper})")]
    NotParseval { lower: f64, upper: f64 },

    #[error("frame is not tight (bounds A = {lower}, B = {upper})")]
    NotTight { lower: f64, upper: f64 },

    #[error("D Dᴴ is singular; the frame has lower bound A = 0")]
    SingularGram,

    #[error("dense eigen-decomposition refused: {rows} rows exceeds the cap of {cap}")]
    DenseCapExceeded { rows: usize, cap: usize },

    #[error("exhaustive UP check refused: {supports} supports exceed the budget of {budget}")]
    UpBudgetExceeded { supports: u128, budget: u128 },

    #[error("step sizes violate τσ(‖D‖² + 1) < 1: product is {product}")]
    StepSizeCondition { product: f64 },

    #[error("iterates diverged (non-finite value) at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("dual point violates ‖Dᴴz‖ ≤ 1: norm is {norm}")]
    DualInfeasible { norm: f64 },

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{failed} of {trials} trials failed at sweep point {point} (budget {budget})")]
    FailureBudget {
        point: usize,
        failed: usize,
        trials: usize,
        budget: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, actual })
        }
    }
}

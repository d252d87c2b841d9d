use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability p[{index}] = {value}: must lie in (0, 1)")]
    InvalidProbability { index: usize, value: f64 },

    #[error("empty Rademacher space")]
    EmptySpace,

    #[error("{what}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("coordinate {index} out of range for a space of {len} coordinates")]
    CoordinateOutOfRange { index: usize, len: usize },

    #[error("subset key {key:#x} references coordinates outside a space of {len}")]
    SubsetOutOfRange { key: u64, len: usize },

    #[error("{what} requires {required} but the cap is {cap}")]
    CapExceeded {
        what: &'static str,
        required: u128,
        cap: u128,
    },

    #[error("functionals live on different Rademacher spaces")]
    SpaceMismatch,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("envelope is not nonnegative and nondecreasing: {0}")]
    EnvelopeNotMonotone(String),

    #[error("argument {value} outside the admissible domain [{low}, {high}]")]
    OutOfDomain { value: f64, low: f64, high: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for the errors that mean "the instance is too large to handle
    /// exactly" rather than "the input is wrong".
    pub fn is_cap_exceeded(&self) -> bool {
        matches!(self, Error::CapExceeded { .. })
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("level count must be at least 2, got {0}")]
    InvalidLevelCount(usize),

    #[error("basis of {requested} states exceeds the capacity cap of {cap}")]
    Capacity { requested: u128, cap: u128 },

    #[error("occupation vector sums to {found}, expected {expected}")]
    InvalidOccupation { expected: u32, found: u64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("level index {level} out of range for D = {levels}")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("parity projection has norm {norm:e}, below tolerance {tolerance:e}")]
    ZeroProjection { norm: f64, tolerance: f64 },

    #[error("coherent-state overlap {overlap:e} underflows; use the log-form evaluation")]
    DivisionHazard { overlap: f64 },

    #[error("states live in different bases")]
    BasisMismatch,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown limit kind `{0}`")]
    UnknownKind(String),
}

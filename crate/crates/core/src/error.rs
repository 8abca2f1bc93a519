use thiserror::Error;

/// Crate-wide error type. Numeric statuses that are part of normal control
/// flow (solver outcomes, verification verdicts) are plain enums on their
/// result types, not errors; this type is for conditions that abort an
/// operation outright.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial parse error at byte {offset}: {message}")]
    PolyParse { offset: usize, message: String },

    #[error("set file parse error at line {line}, column {column}: {message}")]
    SetParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("relaxation order too small: need N >= {required}, given N = {given}")]
    OrderTooSmall { required: usize, given: usize },

    #[error("preordering over {count} inequalities exceeds the cap of {cap}; use module mode")]
    TooManyConstraints { count: usize, cap: usize },

    #[error("no strictly interior point found after {attempts} samples; pass an explicit interior hint")]
    NoInteriorPoint { attempts: usize },

    #[error("center {index} is not on the sampled boundary (residual {residual:.3e})")]
    NotOnBoundary { index: usize, residual: f64 },

    #[error("input set appears noncompact: {0}")]
    Noncompact(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("unsupported representation format version {found} (supported: {supported})")]
    FormatVersion { found: u32, supported: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

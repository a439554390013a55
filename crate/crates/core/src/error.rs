use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },

    #[error("operation requires a non-empty bit string")]
    EmptyInput,

    #[error("word layout covers {layout} bits but the string has {len}")]
    LayoutMismatch { layout: usize, len: usize },

    #[error("selector has {available} bits but the layout needs {needed}")]
    InsufficientSelector { needed: usize, available: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid bit string: {0}")]
    InvalidBits(String),

    #[error("malformed biocode: {0}")]
    MalformedBiocode(String),

    #[error("fake template cannot be made distinct from the enrolled template")]
    DegenerateFake,

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("instance too large for exhaustive enumeration (n = {n}, limit {limit})")]
    InstanceTooLarge { n: usize, limit: usize },

    #[error("biocodes use different parameters")]
    ParamMismatch,

    #[error("candidate budget exhausted after {tested} digest evaluations")]
    BudgetExceeded { tested: u64 },

    #[error("no candidate matched the key digest after {tested} evaluations")]
    NoCandidateMatched { tested: u64 },

    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

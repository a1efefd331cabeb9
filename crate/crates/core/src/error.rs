use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid walk parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("arity error: {0}")]
    Arity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("enumeration of {size} points exceeds the guard of {guard}")]
    Size { size: u128, guard: u128 },

    /// The distance to uniform did not drop below the target before `t_max`.
    #[error("not mixed by t={t_max} (last d = {last_d:.6e})")]
    NotMixed { t_max: u64, last_d: f64 },

    #[error("walk exceeded its step budget of {budget} before travelling L={travel}")]
    Runaway { budget: u64, travel: u64 },

    #[error("campaign dominated by unmixed runs at n={n}: {not_mixed} of {total} did not mix")]
    Campaign { n: usize, not_mixed: usize, total: usize },

    #[error("degenerate linear system: {0}")]
    Degenerate(String),

    #[error("schema version {found} in store, expected {expected}")]
    Schema { found: u32, expected: u32 },

    #[error("corrupted store at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

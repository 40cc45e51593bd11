use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("region error: {0}")]
    Region(String),

    #[error("degenerate cut-off: {0}")]
    DegenerateCutoff(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("exponent out of range: {0}")]
    Exponent(String),

    #[error("empty ladder")]
    EmptyLadder,

    #[error("tensor is not skew-symmetric (max |d_jl + d_lj| = {0:e})")]
    NotSkew(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time step {tau} violates the stability guard; use tau <= {suggested}")]
    StepTooLarge { tau: f64, suggested: f64 },

    #[error("iteration-lemma hypothesis fails at t = {t}, s = {s}")]
    Hypothesis { t: f64, s: f64 },

    #[error("unknown kind `{0}`")]
    UnknownKind(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

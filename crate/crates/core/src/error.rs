use thiserror::Error;

#[derive(Debug, Error)]
pub enum IkError {
    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("expected {expected} joint angles, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("degenerate (cos, sin) pair at joint {0}: both components are zero")]
    DegenerateAngle(usize),

    #[error("program does not match chain: {0}")]
    Inconsistent(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("unknown design set `{0}` (expected orth, rand6 or rand4)")]
    UnknownDesignSet(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = IkError> = std::result::Result<T, E>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ordering violation: {0}")]
    Ordering(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("decode error at offset {offset}: {msg}")]
    Decode { offset: usize, msg: String },

    /// Every token fell outside the beam. The best token is always kept, so
    /// seeing this means the search itself is broken.
    #[error("hard pruning: no active tokens survived frame {frame}")]
    HardPruning { frame: u64 },

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: u64, len: u64 },

    #[error("invalid benchmark spec: {0}")]
    InvalidSpec(String),

    #[error("incomplete run: {0}")]
    IncompleteRun(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

//! Error types shared by all modules.

/// Crate-wide error type.
///
/// Variants map onto the CLI exit codes: `Config` and `Parse` exit with 1,
/// `Integrity` with 3, everything else with 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Dimension or shape mismatch; the message names the offending shapes
    /// (and the graph node, when raised inside the tape).
    #[error("shape error: {0}")]
    Shape(String),

    /// An operation was called while the object is in the wrong state
    /// (e.g. adding a task entry while the previous one is still unfrozen).
    #[error("state error: {0}")]
    State(String),

    /// A requested entity (task id, layer, file entry) does not exist.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// A precondition of the operation's contract was violated.
    #[error("contract error: {0}")]
    Contract(String),

    /// Invalid training data (e.g. label outside the global class range).
    #[error("data error: {0}")]
    Data(String),

    /// Invalid configuration value or missing field.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed file content; `offset` is the byte position of the failure.
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: u64, msg: String },

    /// Checksum mismatch or corrupted artifact.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// Training diverged (non-finite loss); `step` is the global step index.
    #[error("training error at step {step}: {msg}")]
    Training { step: u64, msg: String },

    /// A similarity value is undefined for the given inputs (e.g. a matrix
    /// that is zero after column-centering).
    #[error("similarity undefined: {0}")]
    Degenerate(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this error, per the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 1,
            Error::Integrity(_) => 3,
            _ => 2,
        }
    }
}

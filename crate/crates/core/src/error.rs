use thiserror::Error;

pub type Result<T> = std::result::Result<T, RbcError>;

#[derive(Debug, Error)]
pub enum RbcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Malformed file contents (bad magic, version, header).
    #[error("format error: {0}")]
    Format(String),
    /// Well-formed file carrying unusable values (e.g. NaN coordinates).
    #[error("data error: {0}")]
    Data(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl RbcError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RbcError::InvalidArgument(msg.into())
    }

    /// Process exit code used by the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            RbcError::InvalidArgument(_) => 2,
            RbcError::Format(_) | RbcError::Data(_) | RbcError::Io(_) => 3,
            RbcError::Invariant(_) => 4,
        }
    }
}

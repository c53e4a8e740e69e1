use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or mismatched shapes.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Persisted data failed a structural or semantic validation.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("checksum mismatch in {}: expected {expected:08x}, found {found:08x}", path.display())]
    Checksum {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("unsupported format version {found} in {} (expected {expected})", path.display())]
    Version {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("malformed file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// Non-finite loss or activations during training.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An empty input where at least one element is required.
    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit code for this error class (0 success, 1 check failure,
    /// 2 configuration, 3 I/O, 4 numeric).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Validation(_) | Error::Empty(_) => 2,
            Error::Checksum { .. }
            | Error::Version { .. }
            | Error::Format { .. }
            | Error::MissingFile(_)
            | Error::Io { .. }
            | Error::Json { .. } => 3,
            Error::Numeric(_) => 4,
        }
    }
}

macro_rules! config_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Config(format!($($arg)*))
    };
}
pub(crate) use config_err;

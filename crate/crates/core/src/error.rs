use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("degenerate batch: channel {channel} has only {count} value(s) in training mode")]
    DegenerateBatch { channel: usize, count: usize },

    #[error("invalid label {label}: expected a class index below {classes}")]
    InvalidLabel { label: usize, classes: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("unsupported version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("invalid crop: {0}")]
    InvalidCrop(String),

    #[error("out of range: {message} (legal bound {bound})")]
    Range { message: String, bound: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("undefined result: {0}")]
    Undefined(&'static str),

    #[error("unknown class directory '{name}'; expected one of: {expected}")]
    UnknownClass { name: String, expected: String },

    #[error("numerical failure at batch {batch}: {message}")]
    Numerical { batch: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Attaches a path to an error raised while decoding that file.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::File { .. }) => e,
            e => Error::File { path: path.into(), source: Box::new(e) },
        }
    }

    /// Process exit code: 1 usage/config, 2 data or format, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Range { .. } | Error::InvalidCrop(_) => 1,
            Error::Numerical { .. } => 3,
            Error::File { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

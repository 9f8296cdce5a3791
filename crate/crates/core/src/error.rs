use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("query time {time} is outside the scene time range [{start}, {end}]")]
    TimeOutOfRange { time: f64, start: f64, end: f64 },

    #[error("gaussian index {index} out of range for keyframe {keyframe} ({len} gaussians)")]
    IndexOutOfRange { keyframe: usize, index: usize, len: usize },

    #[error("degenerate keyframe interval [{start}, {end}]")]
    DegenerateInterval { start: f64, end: f64 },

    #[error("operation needs at least {needed} keyframes, scene has {have}")]
    TooFewKeyframes { needed: usize, have: usize },

    #[error("look-at undefined: camera at ({x}, {y}, {z}) coincides with the scene center")]
    DegenerateLookAt { x: f64, y: f64, z: f64 },

    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Failures while reading or writing the on-disk formats.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file not found")]
    MissingFile { path: PathBuf },

    #[error("{path}: unsupported format version {found} (expected {expected})")]
    VersionMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },

    #[error("{path}: missing property `{name}`")]
    MissingProperty { path: PathBuf, name: String },

    #[error("{path}: non-finite value in `{field}`")]
    NonFinite { path: PathBuf, field: String },

    #[error("{path}: invariant violated: {message}")]
    Invariant { path: PathBuf, message: String },

    #[error("{path}: malformed file: {message}")]
    Malformed { path: PathBuf, message: String },
}

impl FormatError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            FormatError::MissingFile { path }
        } else {
            FormatError::Io { path, source }
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        FormatError::Malformed {
            path: path.into(),
            message: message.into(),
        }
    }
}

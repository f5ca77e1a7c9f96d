use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot decode recording `{recording}`: {reason}")]
    Decode { recording: String, reason: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid format: {0}")]
    Format(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot split class `{class}`: {reason}")]
    Split { class: String, reason: String },

    #[error("cannot fit probe: {0}")]
    Fit(String),

    #[error("missing class `{0}`")]
    MissingClass(String),

    #[error("zero total variance: {0}")]
    ZeroVariance(String),

    #[error("training diverged at step {step} (non-finite loss); last good checkpoint: {}",
        last_good.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()))]
    Diverged { step: u64, last_good: Option<PathBuf> },

    #[error("unsupported file version {found} (reader supports major {supported})")]
    Version { found: String, supported: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for this error: 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Config(_) => 2,
            Error::Diverged { .. } | Error::ZeroVariance(_) | Error::Fit(_) => 4,
            _ => 3,
        }
    }
}

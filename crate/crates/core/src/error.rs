use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("training failed at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    ///
    /// Configuration-like failures map to 2, numerical failures to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Training { .. } | Error::UndefinedMetric(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

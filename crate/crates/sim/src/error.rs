use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("{}:{line}: {msg}", file.display())]
    Parse { file: PathBuf, line: usize, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] backflow_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown algorithm {0:?}; expected one of dvr_only, sbpr, fbpr, sbpr+nhops, fbpr+nhops, sbpr+stitch, fbpr+stitch")]
    UnknownAlgorithm(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    /// Process exit status: 2 for invalid input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Parse { .. } | SimError::Config(_) | SimError::UnknownAlgorithm(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

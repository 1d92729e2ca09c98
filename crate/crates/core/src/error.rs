use std::path::PathBuf;

/// Errors produced by simulation, training and experiment orchestration.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration failed at substep {substep}: {reason}")]
    Integration { substep: usize, reason: String },

    #[error("episode simulation failed at control step {step}: {source}")]
    Episode {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("rollout failed (seed {seed}, epoch {epoch}, episode {episode}): {source}")]
    Rollout {
        seed: u64,
        epoch: usize,
        episode: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("gradient computation failed: {0}")]
    Gradient(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

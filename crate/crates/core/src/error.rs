use std::fmt;

use thiserror::Error;

/// Pipeline stage identifiers, attached to errors surfaced by `run_pipeline`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Depth,
    Sampling,
    Filtering,
    Clustering,
    Axis,
    Scoring,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Depth => "depth",
            Stage::Sampling => "sampling",
            Stage::Filtering => "filtering",
            Stage::Clustering => "clustering",
            Stage::Axis => "axis",
            Stage::Scoring => "scoring",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("background estimation failed: {0}")]
    Estimation(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The stage that produced this error, when it came out of the pipeline.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

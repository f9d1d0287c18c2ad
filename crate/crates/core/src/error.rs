//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("bad volume format: {0}")]
    Format(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("no subject found in slice (empty fat mask)")]
    NoSubject,

    #[error("degenerate contour: {0}")]
    DegenerateContour(String),

    #[error("need at least {need} candidates, got {got}")]
    TooFewCandidates { need: usize, got: usize },

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("embedding failed: {0}")]
    Embedding(String),

    #[error("degenerate convex hull: {0}")]
    DegenerateHull(String),

    #[error("slice {slice}, stage {stage}: {source}")]
    Stage {
        slice: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tag an error with the slice index and pipeline stage it came from.
    pub fn at_stage(self, slice: usize, stage: &'static str) -> Self {
        Error::Stage {
            slice,
            stage,
            source: Box::new(self),
        }
    }
}

use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("index {index} out of bounds for axis {axis} of extent {extent}")]
    Bounds {
        axis: char,
        index: usize,
        extent: usize,
    },

    /// A cluster lost all of its membership mass, so its center is undefined.
    #[error("degenerate cluster {cluster}: membership mass is zero")]
    DegenerateCluster { cluster: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("non-finite fitness {value} at position {position:?}")]
    NonFiniteFitness { value: f64, position: Vec<f64> },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Format(_) | Error::Bounds { .. }
        )
    }
}

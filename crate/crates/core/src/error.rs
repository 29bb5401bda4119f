use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the filtering toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid window: burn-in {t0} + window {w} exceeds horizon {t_f}")]
    InvalidWindow { t0: usize, w: usize, t_f: usize },

    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("training diverged at outer iteration {iteration}: {loss} loss is {value}")]
    TrainingDiverged {
        iteration: usize,
        loss: &'static str,
        value: f64,
    },

    #[error("degenerate particle weights: {0}")]
    DegenerateWeights(String),

    #[error("observation window not full: holds {have} of {need} observations")]
    WindowWarmUp { have: usize, need: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}

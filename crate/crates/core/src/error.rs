use std::path::PathBuf;

use crate::gaussian::ModalBasis;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("state is not physical (margin {margin:e})")]
    Unphysical { margin: f64 },

    #[error("expected a state in the {expected} basis")]
    WrongBasis { expected: ModalBasis },

    #[error("insufficient phase coverage: {0}")]
    Coverage(String),

    #[error("estimator failure: {0}")]
    Estimator(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing input: {0}")]
    Missing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Formula syntax, model specification or option problems.
    Specification,
    /// Malformed or inconsistent input data.
    Data,
    /// Empty categorical cells/levels or rank deficiency.
    Identification,
    /// Solver failures: non-convergence, separation, degenerate arithmetic.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("formula syntax error at position {position}: {message}")]
    FormulaSyntax { position: usize, message: String },

    #[error("invalid model specification: {0}")]
    Spec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("empty categorical cell: {0}")]
    EmptyCell(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("did not converge after {iterations} iterations: {detail}")]
    NonConvergence { iterations: usize, detail: String },

    #[error("separation detected: {0}")]
    Separation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::FormulaSyntax { .. } | Error::Spec(_) | Error::InvalidArgument(_) => {
                ErrorKind::Specification
            }
            Error::Data(_) | Error::Io(_) => ErrorKind::Data,
            Error::EmptyCell(_) | Error::RankDeficient(_) => ErrorKind::Identification,
            Error::Dimension(_)
            | Error::NonConvergence { .. }
            | Error::Separation(_)
            | Error::Numerical(_) => ErrorKind::Numerical,
        }
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shift is not normal: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotNormal { residual: f64, tol: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires distinct eigenvalues")]
    EigsNotDistinct,

    #[error("invalid graph spec: {0}")]
    InvalidSpec(String),

    #[error("graph is disconnected: no finite-distance merge remains with {blocks} blocks")]
    Disconnected { blocks: usize },

    #[error("window bank is empty")]
    EmptyBank,

    #[error("ill-conditioned Gram matrix (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("filter degree {degree} exceeds N-1 = {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("invalid exponents a={a}, b={b}, c={c}")]
    InvalidExponents { a: usize, b: usize, c: usize },

    #[error("shift is not symmetric")]
    NotSymmetric,

    #[error("shift is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    ShiftNotPsd { min_eig: f64 },

    #[error("pole on the spectrum: |denominator| = {value:.3e} at frequency {index}")]
    PoleOnGrid { index: usize, value: f64 },

    #[error("no restart reduced the objective below the flat-model baseline {baseline:.3e}")]
    NoDescent { baseline: f64 },

    #[error("PSD entry {index} is negative ({value:.3e}) beyond the clipping tolerance")]
    NegativePsd { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures map to a distinct CLI exit code from validation errors.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_)
                | Error::NotNormal { .. }
                | Error::EigsNotDistinct
                | Error::IllConditioned { .. }
                | Error::DegreeOverflow { .. }
                | Error::PoleOnGrid { .. }
                | Error::NoDescent { .. }
                | Error::NegativePsd { .. }
        )
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArg(String),

    #[error("{routine} failed with info={info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("no spectral gap found above threshold {0}; enlarge the spectrum window")]
    NoGap(f64),

    #[error("auxiliary iteration not contracting (observed factor {0}); beta too small")]
    NotContracting(f64),

    #[error("index not converged: {0}")]
    Unconverged(String),

    #[error("inconclusive singular-value separation (ratio {0:.3e} < 1e3)")]
    Inconclusive(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

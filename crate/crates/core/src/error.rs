use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of the arguments do not agree with the problem instance.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A value is NaN, negative where nonnegativity is required, or otherwise malformed.
    #[error("invalid input: {0}")]
    Input(String),

    /// A model or method parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Errors caused by the caller's input rather than by a computation failing.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Dimension(_) | Error::Input(_) | Error::Parameter(_)
        )
    }
}

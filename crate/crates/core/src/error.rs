use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown factor label `{0}`")]
    UnknownLabel(String),

    #[error("integration failed at t = {time} ms: trace drift {drift:.3e}, use a smaller step")]
    Integration { time: f64, drift: f64 },

    #[error("steady state is not unique: nullspace dimension {0}")]
    AmbiguousSteadyState(usize),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

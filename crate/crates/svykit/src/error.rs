use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Bad argument value or incompatible options.
    #[error("invalid input: {0}")]
    Input(String),
    /// Frame or data file problems.
    #[error("data error: {0}")]
    Data(String),
    #[error("unit {0} has zero inclusion probability")]
    ZeroInclusion(String),
    #[error("support has {size} sets, above the cap of {cap}")]
    SupportTooLarge { size: f64, cap: usize },
    #[error("design cannot be enumerated: {0}")]
    NotEnumerable(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("no convergence after {iterations} iterations: {detail}")]
    NoConvergence { iterations: usize, detail: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("non-finite value encountered in {0}")]
    Numeric(String),

    #[error("argument {argument} is beyond the representable range of {function}")]
    Range {
        function: &'static str,
        argument: f64,
    },

    #[error(
        "Gram matrix for degree {m} is too ill-conditioned at k = {k}: estimate {estimate:.3e} exceeds budget {budget:.3e}"
    )]
    Conditioning {
        m: usize,
        k: usize,
        estimate: f64,
        budget: f64,
    },

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("operator is not coercive: sup|q| = {sup_q:.4e} but smallest eigenvalue is {lambda_min:.4e}")]
    Solvability { sup_q: f64, lambda_min: f64 },

    #[error(
        "residual budget {budget:.3e} is infeasible; best achievable residual is {achieved:.3e}"
    )]
    Infeasible { budget: f64, achieved: f64 },

    #[error("matrix X-norm {norm:.4e} exceeds the net radius {radius:.4e}")]
    OutOfBall { norm: f64, radius: f64 },

    #[error("enumeration of {requested} members exceeds the budget of {budget}")]
    Budget { requested: u128, budget: u128 },

    #[error("only {achieved} of {requested} singular values are above the noise floor")]
    Truncated { requested: usize, achieved: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

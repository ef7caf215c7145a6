use thiserror::Error;

/// Failure modes shared by every module.
///
/// The CLI maps [`Error::is_numerical`] variants to exit code 3 and the rest
/// to exit code 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("branch error: {0}")]
    Branch(String),
    #[error("outside the stationary region: {0}")]
    OutsideRegion(String),
    #[error("wronskian degenerate at lambda = {lambda}: |W| = {wronskian:e}")]
    WronskianDegenerate { lambda: f64, wronskian: f64 },
    #[error("non-convergence: {what}; sequence = {sequence:?}")]
    NonConvergence { what: String, sequence: Vec<f64> },
    #[error("rank deficiency: condition number {0:e}")]
    RankDeficient(f64),
    #[error("divergent tail integral: {0}")]
    Divergent(String),
    #[error("instability: {0}")]
    Instability(String),
    #[error("quadrature budget exceeded: {0}")]
    Budget(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("config error at line {line}, column {col}: {msg}")]
    Config { line: usize, col: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::WronskianDegenerate { .. }
                | Error::NonConvergence { .. }
                | Error::RankDeficient(_)
                | Error::Divergent(_)
                | Error::Instability(_)
                | Error::Budget(_)
        )
    }

    pub(crate) fn nonconv(what: impl Into<String>, sequence: Vec<f64>) -> Self {
        Error::NonConvergence { what: what.into(), sequence }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

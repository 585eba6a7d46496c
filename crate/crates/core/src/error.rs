use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// An argument lies outside the domain of a function (e.g. a cost below free flow).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge within {iterations} iterations (last change {last_change:e})")]
    Divergence {
        what: &'static str,
        iterations: usize,
        last_change: f64,
    },

    #[error("demand from node {origin} cannot reach destination {destination}")]
    Unreachable { origin: usize, destination: usize },

    #[error("path enumeration infeasible: {0}")]
    OracleInfeasible(String),

    #[error("backtracking stalled at iteration {iteration}: step size {step:e} below floor")]
    Stall { iteration: usize, step: f64 },
}

impl Error {
    /// Short machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Structure(_) => "structure",
            Error::Validation(_) => "validation",
            Error::Domain(_) => "domain",
            Error::Divergence { .. } => "divergence",
            Error::Unreachable { .. } => "unreachable",
            Error::OracleInfeasible(_) => "oracle",
            Error::Stall { .. } => "stall",
        }
    }
}

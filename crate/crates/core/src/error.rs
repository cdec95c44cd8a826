use thiserror::Error;

/// Errors raised across the radio, queueing and orchestration layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("argument out of domain: {0}")]
    OutOfDomain(String),

    #[error("divergent series: {0}")]
    DivergentSeries(String),

    #[error("degenerate integration region: no accepted samples out of {samples}")]
    DegenerateRegion { samples: usize },

    #[error("invalid route: {0}")]
    InvalidRoute(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unstable system: {0}")]
    Instability(String),

    #[error("undefined class chain: zero rate {rate} referenced for class {class} at t={t}s")]
    UndefinedChain { rate: String, class: usize, t: f64 },

    #[error("fixed point did not converge after {iterations} iterations (last iterate {last:?})")]
    NonConvergence { iterations: usize, last: (f64, f64) },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical layer (instability, non-convergence,
    /// undefined chains), as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Instability(_)
                | Error::NonConvergence { .. }
                | Error::UndefinedChain { .. }
                | Error::DivergentSeries(_)
                | Error::DegenerateRegion { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

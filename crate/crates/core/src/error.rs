use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported body: {0}")]
    UnsupportedBody(String),

    /// A rejection sampler accepted too few proposals to be practical.
    #[error("sampler efficiency too low: {what} rate {rate:.3e} < {min_rate:.1e}; {advice}")]
    Efficiency {
        what: &'static str,
        rate: f64,
        min_rate: f64,
        advice: &'static str,
    },

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error:.3e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("worker pool: {0}")]
    Pool(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

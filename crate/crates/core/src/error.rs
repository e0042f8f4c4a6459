use thiserror::Error;

/// Errors raised by the computational modules.
///
/// Mathematical property violations (a sieve instance exceeding its bound,
/// a Hecke relation failing) are reported as data, not as errors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported weight {weight}: {reason}")]
    UnsupportedWeight { weight: u32, reason: &'static str },

    #[error("index {index} is outside the table (cutoff {cutoff})")]
    OutOfRange { index: u64, cutoff: u64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("moduli {a} and {b} are not coprime")]
    NonCoprime { a: u64, b: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{value} is too large for the brute-force oracle (limit {limit})")]
    OracleRange { value: u64, limit: u64 },

    #[error("argument {0} is within 1e-8 of a pole")]
    PoleProximity(String),

    #[error("quadrature tail bound {bound:e} cannot reach tolerance {tolerance:e} within |t| <= {max_t}")]
    TailBoundUnattainable {
        bound: f64,
        tolerance: f64,
        max_t: f64,
    },

    #[error("Satake parameters are not unitary at p = {p}: |lambda(p)| = {lambda}")]
    NonUnitary { p: u64, lambda: f64 },

    #[error("numeric underflow: {0}")]
    Underflow(String),

    #[error("exact product needs {needed} CRT primes, only {available} are available")]
    CrtCapacity { needed: usize, available: usize },

    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

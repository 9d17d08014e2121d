use thiserror::Error;

/// Errors raised by the analytic and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid Lévy specification: {0}")]
    InvalidSpec(String),

    #[error("one-sided derivative is not finite at {0}")]
    NonFinite(f64),

    #[error("root finder failed to converge: {0}")]
    NoConvergence(String),

    #[error("truncated drift {drift} at level n = {level} is not positive; raise n")]
    NegativeDrift { level: u32, drift: f64 },

    #[error("tolerance not met: value {value}, estimated error {error}, requested {requested}")]
    TolNotMet {
        value: f64,
        error: f64,
        requested: f64,
    },

    #[error("numerically repeated root of Ψ(θ) = q near θ = {0}")]
    RepeatedRoot(f64),

    #[error("barrier mode {0} is not supported by this operation")]
    UnsupportedMode(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("refracted specification failed its validity certificate: {0}")]
    CertInvalid(String),

    #[error("integrand growth is not integrable against the kernel: {0}")]
    Divergent(String),

    #[error("computation cancelled")]
    Cancelled,
}

pub type Result<T> = std::result::Result<T, Error>;

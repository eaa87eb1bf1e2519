use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a physical or structural invariant.
    #[error("domain error: {0}")]
    Domain(String),

    /// Anti-damping from the optical drive exceeds intrinsic damping.
    #[error("mechanical instability: gamma_opt = {gamma_opt:.6e} rad/s <= -gamma_m = {neg_gamma_m:.6e} rad/s")]
    Instability { gamma_opt: f64, neg_gamma_m: f64 },

    /// A root finder or derivative failed to produce a usable answer.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Bad data handed to an analysis routine (empty window, missing tone, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Fitted data contradicts the model assumptions.
    #[error("inconsistent data: {0}")]
    Inconsistent(String),

    /// Malformed text file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

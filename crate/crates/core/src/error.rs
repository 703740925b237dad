use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("chart domain error: {0}")]
    ChartDomain(String),

    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {t:e}")]
    Divergence { t: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t:e}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("no section crossing before t = {horizon:e}")]
    NoCrossing { horizon: f64 },

    #[error("log argument not positive: {factor} = {value:e}")]
    Branch { factor: &'static str, value: f64 },

    #[error("root found at beta0 = {beta0} but constraint violated: {reason}")]
    Infeasible { beta0: f64, reason: String },

    #[error("return map escaped on leg {leg}: {source}")]
    Escape {
        leg: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NoOrbit {
        iterations: usize,
        residual: f64,
        trace: Vec<[f64; 3]>,
    },

    #[error("root finding failed: {0}")]
    Root(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size error: {0}")]
    Size(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("integration failure at t = {t_reached}: {reason}")]
    Integration { t_reached: f64, reason: String },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("spectrum not in A_N (margin {margin:e})")]
    NotInAN { margin: f64 },
    #[error("degenerate spacing: {0}")]
    Degenerate(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature accuracy: est_error {est_error:e} for log value {log_abs}")]
    Accuracy { est_error: f64, log_abs: f64 },
    #[error("fixed point did not converge after {iterations} iterations (last residual {last_residual:e})")]
    NonConvergence { iterations: usize, last_residual: f64, trace: Vec<f64> },
    #[error("points outside grid; widen to at least [{lo}, {hi}]")]
    WidenGrid { lo: f64, hi: f64 },
    #[error("sampler tuning failure: acceptance {acceptance:.3}")]
    Tuning { acceptance: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

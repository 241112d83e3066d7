use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("enumeration budget of {budget} candidates exceeded (needed at least {needed})")]
    Budget { budget: u64, needed: u64 },

    #[error("system is not contracting on average (mean log rate {mean_log_rate})")]
    NonContracting { mean_log_rate: f64 },

    #[error("positive-rate stopping time exceeded cap of {cap} compositions")]
    StoppingCap { cap: usize },
}

impl Error {
    /// True for errors that are caused by resource limits rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Budget { .. } | Error::StoppingCap { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

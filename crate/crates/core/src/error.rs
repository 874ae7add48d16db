use thiserror::Error;

/// Errors raised by market clearing and the analyses built on it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChpError {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Demand exceeds the capacity left after exclusions.
    #[error("infeasible: demand {demand} MW exceeds available capacity {available} MW (shortfall {shortfall} MW)")]
    Infeasible {
        demand: f64,
        available: f64,
        shortfall: f64,
    },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("generator index {index} out of range for a market of {n} generators")]
    IndexOutOfRange { index: usize, n: usize },

    /// A scenario document does not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A scenario parses but violates a modelling requirement.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl ChpError {
    pub(crate) fn infeasible(demand: f64, available: f64) -> Self {
        ChpError::Infeasible {
            demand,
            available,
            shortfall: demand - available,
        }
    }

    /// Short machine-greppable code used on the command line.
    pub fn code(&self) -> &'static str {
        match self {
            ChpError::Infeasible { .. } => "E_INFEASIBLE",
            ChpError::Schema(_) | ChpError::Config(_) => "E_SCHEMA",
            ChpError::Domain(_) => "E_DOMAIN",
            ChpError::TooLarge(_) => "E_TOO_LARGE",
            ChpError::IndexOutOfRange { .. } => "E_USAGE",
            ChpError::Io(_) => "E_IO",
        }
    }
}

impl From<std::io::Error> for ChpError {
    fn from(e: std::io::Error) -> Self {
        ChpError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ChpError>;

use thiserror::Error;

/// Errors produced by the drive model, plant integrators and analyzer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integrator guard violated: {0}")]
    Guard(String),

    #[error("analysis window rejected: {0}")]
    Window(String),

    #[error("fundamental magnitude is zero; THD is undefined")]
    ZeroFundamental,

    #[error("steady state not reached: cycle RMS drift {drift:.4} exceeds {limit}")]
    NotSteady { drift: f64, limit: f64 },

    #[error("{scheme} at m={m}: {source}")]
    Cell {
        scheme: String,
        m: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the integrator stability/accuracy guards.
    pub fn is_guard(&self) -> bool {
        match self {
            Error::Guard(_) => true,
            Error::Cell { source, .. } => source.is_guard(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

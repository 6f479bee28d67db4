use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input outside the region where a model or kernel is valid.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative series or solver ran out of budget.
    #[error("no convergence after {iterations} iterations: {what}")]
    Convergence { what: String, iterations: usize },

    #[error("root not bracketed: f({lo})={f_lo:e}, f({hi})={f_hi:e}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("calibration failed (residual {residual:e}): {reason}")]
    Calibration { reason: String, residual: f64 },

    #[error("decay fit rejected (residual {residual:e}): {reason}")]
    FitQuality { reason: String, residual: f64 },

    /// The ODE integrator could not meet the requested tolerance.
    #[error("integrator accuracy not met at t={t:e} s (step {step:e} s)")]
    Accuracy { t: f64, step: f64 },

    #[error("degenerate operating point: {0}")]
    DegeneratePoint(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Convergence { .. } => "convergence",
            Error::Bracket { .. } => "bracket",
            Error::Calibration { .. } => "calibration",
            Error::FitQuality { .. } => "fit_quality",
            Error::Accuracy { .. } => "accuracy",
            Error::DegeneratePoint(_) => "degenerate_point",
            Error::InvalidParameter(_) => "invalid_parameter",
        }
    }
}

use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero polynomial")]
    DivisionByZero,

    #[error("insufficient Laurent precision: coefficient of t^{exp} is unknown")]
    Precision { exp: i64 },

    #[error("infeasible: {what} needs about {cost:.3e} unit operations (budget {budget:.3e})")]
    Infeasible { what: String, cost: f64, budget: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn infeasible(what: impl Into<String>, cost: f64, budget: f64) -> Self {
        Error::Infeasible { what: what.into(), cost, budget }
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("evaluation failed at x = {x}: {what}")]
    Evaluation { x: f64, what: String },

    #[error("quadrature did not converge (best estimate {estimate:e}, error estimate {error:e})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("non-finite function value at {x}")]
    NonFinite { x: f64 },

    #[error("price {price} is not feasible: {reason}")]
    Infeasible { price: f64, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("simulation failed: {0}")]
    Simulation(String),
}

impl Error {
    /// Process exit code: 1 for bad input or violated preconditions, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible { .. } | Error::Precondition(_) | Error::Config(_) => 1,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Evaluation { .. } => "evaluation",
            Error::Quadrature { .. } => "quadrature",
            Error::NoBracket { .. } => "no_bracket",
            Error::NonFinite { .. } => "non_finite",
            Error::Infeasible { .. } => "infeasible",
            Error::Precondition(_) => "precondition",
            Error::Config(_) => "config",
            Error::Convergence(_) => "convergence",
            Error::Consistency(_) => "consistency",
            Error::Simulation(_) => "simulation",
        }
    }
}

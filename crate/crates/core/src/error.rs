use thiserror::Error;

/// Errors raised by the library. Variants map onto the CLI exit codes
/// (domain and validation errors versus fit failures).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no steady state: both transition rates are zero")]
    NoSteadyState,

    #[error("rank-deficient Jacobian: {0}")]
    RankDeficient(String),

    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("unresolved Poisson mixture: |mu_minus - mu_zero| = {separation}")]
    UnresolvedMixture { separation: f64 },

    #[error("EM log-likelihood decreased from {before} to {after} at iteration {iteration}")]
    LikelihoodDecrease {
        iteration: usize,
        before: f64,
        after: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors produced by a fitting routine (as opposed to bad input).
    pub fn is_fit_failure(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient(_)
                | Error::NonConvergence { .. }
                | Error::ModelMismatch(_)
                | Error::UnresolvedMixture { .. }
                | Error::LikelihoodDecrease { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Error type shared by every module.

use thiserror::Error;

/// Convenience alias.
pub type Result<T> = std::result::Result<T, CoolError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoolError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("vector is not normalized: sum = {sum}")]
    NotNormalized { sum: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("temperature is unbounded for ground population {0}")]
    UnboundedTemperature(f64),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("majorization fails at prefix {index} (deficit {deficit:.3e})")]
    MajorizationFailure { index: usize, deficit: f64 },
    #[error("matrix is not doubly stochastic: {0}")]
    NotDoublyStochastic(String),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("operation does not conserve energy (commutator norm {0:.3e})")]
    NotEnergyConserving(f64),
    #[error("machine gap restriction violated: {0}")]
    GapRestriction(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl CoolError {
    /// Process exit code used by the command line tool: 3 for internal
    /// consistency failures, 2 for anything caused by the request itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoolError::Internal(_)
            | CoolError::NotUnitary(_)
            | CoolError::NotHermitian(_)
            | CoolError::NotEnergyConserving(_)
            | CoolError::NotDoublyStochastic(_) => 3,
            _ => 2,
        }
    }
}

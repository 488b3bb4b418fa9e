use thiserror::Error;

use crate::Wall;

pub type Result<T, E = QuenchError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuenchError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument {value} outside the domain [0, 1] of phi")]
    Domain { value: f64 },

    #[error("phi' is singular at s = 0 for the power nonlinearity")]
    Singularity,

    #[error("singular boundary flux at the {wall} wall (value {value})")]
    SingularFlux { wall: Wall, value: f64 },

    #[error("state length {found} does not match grid with {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },

    #[error("initial condition leaves (0, 1): u0({x}) = {value}")]
    InitialConditionRange { x: f64, value: f64 },

    #[error("only {found} samples in the fit window, need at least {needed}")]
    InsufficientPoints { found: usize, needed: usize },

    #[error("no admissible nodes for the order estimate")]
    AllNodesExcluded,

    #[error("run did not quench; no wall to analyse")]
    NotQuenched,
}

impl QuenchError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        QuenchError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

use alloc::boxed::Box;
use alloc::string::String;

use crate::multigrid::SolveReport;

pub type Result<T, E = DchError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DchError {
    #[error("invalid hierarchy: coarsest cells per side {coarsest_cells} and level count {levels} must both be >= 1")]
    InvalidHierarchy {
        coarsest_cells: usize,
        levels: usize,
    },

    #[error("level {level} does not exist (finest level is {finest})")]
    NoSuchLevel { level: usize, finest: usize },

    #[error("length mismatch: expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("field lives on level {actual}, expected level {expected}")]
    LevelMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("final time {final_time} is not a positive integer multiple of the time step {tau}")]
    NonIntegerSteps { final_time: f64, tau: f64 },

    #[error("multigrid stopped after {} cycles with residual {:e}", .0.cycles, .0.final_residual)]
    NotConverged(Box<SolveReport>),

    #[error("time step {step} failed: {source}")]
    Step { step: usize, source: Box<DchError> },
}

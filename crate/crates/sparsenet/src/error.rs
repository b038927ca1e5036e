use thiserror::Error;

use crate::graphrecovery::RecoveredPositiveGraph;
use crate::weightlearning::LearnedNet;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter regime violated: {0}")]
    RegimeViolation(String),

    #[error("sample support of size {size} exceeds the cap {cap}")]
    SupportTooDense { size: usize, cap: usize },

    #[error("operation requires real-valued output samples")]
    WrongOutputMode,

    #[error("iteration budget of {budget} exhausted with {} unmarked edges", partial.residue)]
    IterationBudgetExhausted {
        budget: usize,
        partial: Box<RecoveredPositiveGraph>,
    },

    #[error("brute-force cost {cost} exceeds budget {budget}")]
    BudgetExceeded { cost: u128, budget: u128 },

    #[error("learning failed at layer {layer}: {reason}")]
    LayerFailed {
        layer: usize,
        reason: String,
        partial: Box<LearnedNet>,
    },

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

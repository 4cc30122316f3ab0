use thiserror::Error;

use crate::dag::BlockId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("block {block} references unknown or newer parent {parent}")]
    UnknownParent { block: BlockId, parent: BlockId },

    #[error("block id {got} out of sequence, expected {expected}")]
    OutOfSequence { expected: BlockId, got: BlockId },

    #[error("cannot move pool time backwards from {now} to {to}")]
    TimeReversal { now: f64, to: f64 },

    #[error("visible tip pool is empty")]
    EmptyTipPool,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("undefined: {0}")]
    Undefined(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

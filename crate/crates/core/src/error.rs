use crate::strings::BinaryString;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no sibling: the empty string has no last bit")]
    NoSibling,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("invalid bit character {0:?}")]
    InvalidBit(char),
    #[error("undefined at {at}")]
    Undefined { at: BinaryString },
    #[error("partial adversary: no wager at {at}")]
    PartialAdversary { at: BinaryString },
    #[error("not converged to length {len}")]
    NotConverged { len: usize },
    #[error("capital overflow at {at}")]
    CapitalOverflow { at: BinaryString },
    #[error("unknown builtin strategy {0:?}")]
    UnknownBuiltin(String),
    #[error("invalid adversary spec: {0}")]
    BadSpec(String),
    #[error("adversary program error at stage {stage}: {detail}")]
    Program { stage: u64, detail: String },
    #[error("cone exhausted above {base} at length {target_len}")]
    ConeExhausted { base: BinaryString, target_len: usize },
    #[error("block exhausted: no unused element in [{lo}, {hi})")]
    BlockExhausted { lo: u64, hi: u64 },
    #[error("level overflow at index {index}")]
    LevelOverflow { index: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("functional inconsistency: {0}")]
    FunctionalInconsistency(String),
    #[error("oracle too short: need {need} bits, have {have}")]
    OracleTooShort { need: usize, have: usize },
    #[error("construction fault at stage {stage}: {detail}")]
    ConstructionFault { stage: u64, detail: String },
    #[error("trace error: {0}")]
    Trace(String),
    #[error("trace schema version {found} does not match {expected}")]
    TraceVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

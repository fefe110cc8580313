//! Integer-valued martingales and the stage-by-stage constructions that
//! defeat them, run at finite stage budgets with exact integer audits.

pub mod anc;
pub mod error;
pub mod fi;
pub mod forcing;
pub mod levels;
pub mod lv;
pub mod martingale;
pub mod replay;
pub mod strings;
pub mod trace;

pub use error::{Error, Result};
pub use strings::{BinaryString, TailSequence};

//! Reverse-mode gradients for the operator set the decomposers use, plus Adam.

mod adam;
mod check;
mod param;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use check::{finite_diff_check, FiniteDiff, FiniteDiffReport};
pub use param::{Gradients, ParamId, ParamStore, Parameter};
pub use tape::{NodeId, Tape};

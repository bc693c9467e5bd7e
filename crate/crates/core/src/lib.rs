//! Solver-verified reasoning over multiple-choice logic tasks.

pub mod dsl;
pub mod harness;
pub mod llm;
pub mod oracle;
pub mod pipeline;
pub mod smt;
pub mod task;
pub mod verify;

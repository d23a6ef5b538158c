//! Phase state machine: prompt assembly, model-output interpretation, and
//! the per-turn `advance` loop.

pub mod bevs;
pub mod distress;
pub mod markers;
pub mod prompt;
mod session;

pub use session::{
    advance, resume_phase, start_session, EngineConfig, EngineError, EngineOutput, PatchOutcome, SessionState,
    EMPTY_REPLY_TEXT, RETRY_MESSAGE,
};

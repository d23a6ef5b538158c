//! Goal-coaching engine for university students: a four-phase
//! conversation state machine over a language model, a phase-scoped
//! profile store, dashboard metrics, and calendar check-in scheduling.

pub mod clock;
pub mod domain;
pub mod engine;
pub mod gateway;
pub mod metrics;
pub mod providers;
pub mod resources;
pub mod scheduler;
pub mod service;
pub mod settings;
pub mod store;

#[cfg(test)]
mod testing;

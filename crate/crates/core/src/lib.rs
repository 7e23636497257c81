//! Parameterized conversation simulation and evaluation.
//!
//! The crate compiles validated conversation parameters and entrepreneur
//! profiles into generation prompts, talks to LLM providers (or an offline
//! mock), and scores the resulting transcripts on five evaluation tasks:
//! topic diversity, parameter adherence, topic drift, character stability
//! and entity revisit rate. The [`runner`] module ties these together into
//! resumable experiments.

pub mod embed;
pub mod error;
pub mod gateway;
pub mod metrics;
pub mod persona;
pub mod prompt;
pub mod runner;
pub mod schema;

pub use error::{Error, Result};

mod util;

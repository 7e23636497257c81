//! Evaluation metrics for the five evaluation tasks.

mod adherence;
mod diversity;
mod drift;
mod entities;
mod style;
mod text;

pub use adherence::*;
pub use diversity::*;
pub use drift::*;
pub use entities::*;
pub use style::*;

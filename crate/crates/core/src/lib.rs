//! Near-field wideband ISAC simulator.

pub mod beam;
pub mod channel;
pub mod config;
pub mod crb;
pub mod error;
pub mod format;
pub mod geometry;
pub mod runner;
pub mod transforms;
pub mod velocity;

pub use error::{Error, Result};

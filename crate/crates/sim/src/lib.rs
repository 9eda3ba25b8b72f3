//! File formats, fixtures, experiment plans and output writers around the
//! `backflow-core` simulator.

pub mod dump;
pub mod error;
pub mod fixtures;
pub mod formats;
pub mod plan;
pub mod runner;
pub mod scenario;

pub use error::{Result, SimError};

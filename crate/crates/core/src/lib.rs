//! Exact energy-centric placement of microservice request chains on an edge
//! infrastructure, with a seeded experiment harness comparing the overall
//! and the marginal energy objectives.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod infrastructure;
pub mod metrics;
pub mod scenario;
pub mod solver;
pub mod workload;

#[cfg(test)]
mod testkit;

pub use error::{Error, Result};

//! Simulation and classification of financial-customer behavior traces.
//!
//! * [`trace`]: literals, states, traces, deltas, normalization, JSONL files.
//! * [`catalog`] and [`observability`]: what exists and what a bank can see.
//! * [`distance`]: four trace distances, including the relational one.
//! * [`classifier`]: nearest-neighbor classification over a case base,
//!   offline and online (prefix by prefix).
//! * [`sim`]: goal-driven simulation of standard and criminal customers.
//! * [`baseline`]: attribute-value features and a CART decision tree.
//! * [`harness`]: experiment grids, metrics and reports.

pub mod amount;
pub mod baseline;
pub mod catalog;
pub mod classifier;
pub mod distance;
pub mod error;
pub mod harness;
pub mod observability;
pub mod par;
pub mod sim;
pub mod symbol;
pub mod trace;

pub use error::{CatalogError, Error, Result};

/// Recorded in every generated trace.
pub const GENERATOR_VERSION: &str = concat!("tracelab-sim/", env!("CARGO_PKG_VERSION"));

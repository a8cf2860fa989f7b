//! Post-hoc explanations for link predictions of knowledge graph embedding
//! models, and a remove-and-retrain harness that measures how faithful they
//! are. See the `examples/` directory for entry points.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clauses;
pub mod config;
pub mod error;
pub mod explain;
pub mod fixtures;
pub mod graph;
pub mod harness;
pub mod model;
pub mod neighbors;
mod seed;
pub mod surrogate;

pub use error::{Error, Result};

//! Turns Reddit-style post/comment dumps into a directed, weighted agent
//! interaction graph with inferred follow relations, plus the structural and
//! temporal metrics used to benchmark it.

pub mod chains;
pub mod config;
pub mod error;
pub mod graph;
pub mod inference;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod profiles;
pub mod synthetic;
pub mod temporal;

pub use error::{Error, Result};

//! Probabilistic qualitative localization and mapping over landmark triplets.

pub mod cli_io;
pub mod composition;
pub mod error;
pub mod factor_graph;
pub mod geometry;
pub mod metrics;
pub mod models;
pub mod partition;
pub mod simulation;
pub mod solver;

pub use error::{Error, Result};

//! Analogy-based software effort estimation whose adaptation stage (the
//! analogy count, feature subset and per-rank feature weights) is tuned by a
//! multi-objective particle swarm optimizer with a crowding-distance archive.
//!
//! The pipeline is: [`data`] loads and standardizes a project table, [`abe`]
//! retrieves and adapts analogies, [`tuning`] searches the adaptation
//! parameters with the engine in [`mopso`], [`metrics`] and [`stats`] score
//! and compare methods, and [`harness`] runs whole experiments under
//! leave-one-out cross validation.

pub mod abe;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod mopso;
pub mod stats;
pub mod tuning;

pub use error::{Error, Result};

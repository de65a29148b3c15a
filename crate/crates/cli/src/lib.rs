//! Configuration-driven experiments over the `gfstack` library, emitting
//! CSV tables with one checked inequality per row.

pub mod config;
mod error;
pub mod experiments;
pub mod table;

pub use config::{ExperimentConfig, ExperimentKind, PointLayout};
pub use error::{CliError, Result};
pub use experiments::run;
pub use table::{Row, Table};

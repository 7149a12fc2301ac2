//! Driver, benchmark harness and cost-model front end for `ttsvd`.

pub mod bench;
pub mod cli;
pub mod error;
pub mod model;
pub mod report;
pub mod run;
pub mod shape;

pub use error::{CliError, CliResult};

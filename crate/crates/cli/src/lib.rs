//! Command line front end: configuration, training, bounds and benchmark suites.

pub mod bench;
pub mod bound;
pub mod config;
pub mod error;
pub mod fixture;
pub mod output;
pub mod train;

pub use error::{CliError, CliResult};

//! Experiment runner and command-line front end.

pub mod cli;
pub mod config;
pub mod output;
pub mod runs;

pub use cli::{Cli, Command};
pub use config::{load_config, RunConfig};

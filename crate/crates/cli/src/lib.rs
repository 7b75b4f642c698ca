//! Command implementations behind the `xvanon` binary.

pub mod args;
pub mod commands;

pub use args::{Cli, Command};
pub use commands::{run, CliError};

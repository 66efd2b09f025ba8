//! Library surface of the `gptrust` binary: option resolution, the
//! subcommand implementations, the canned experiments, and the run
//! manifest. The binary in `main.rs` is a thin clap wrapper over
//! [`commands`]; everything here is callable directly, which is how the
//! integration tests drive it.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod output;

pub use error::CliError;

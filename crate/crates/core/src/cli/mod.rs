//! Batch command-line front end: configuration, CSV I/O and the four
//! subcommands.

pub mod commands;
pub mod config;
pub mod csvio;

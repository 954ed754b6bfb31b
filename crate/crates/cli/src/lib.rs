//! Library side of the `nutm` command: configuration parsing and the
//! command implementations, kept here so tests can drive them directly.

pub mod commands;
pub mod config;

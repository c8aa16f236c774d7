//! Library side of the `relevance-lens` binary: configuration, the
//! subcommand implementations, and the synthetic fixture used by
//! end-to-end tests.

pub mod commands;
pub mod config;
pub mod errors;
pub mod fixture;
pub mod pipeline;

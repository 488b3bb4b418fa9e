//! Configuration, orchestration and persistence for quenching experiments.
//!
//! The `quench` binary is a thin shell over [`commands`]; everything here is
//! also usable as a library, which is how the integration tests drive it.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod commands;
pub mod config;

pub use commands::CliError;
pub use config::{Config, ConfigError};

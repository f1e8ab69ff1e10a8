//! File formats, run configuration and command implementations for the
//! `trajkde` binary. The numerical work lives in `trajkde_core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use config::RunConfig;
pub use error::{CliError, Result};

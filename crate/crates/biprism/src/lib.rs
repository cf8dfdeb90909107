//! Configuration, file formats, report writers and pipelines for the
//! `biprism` command-line tool. The numerical work lives in `biprism-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod frames;
pub mod pipeline;
pub mod report;

pub use config::RunConfig;
pub use error::{CliError, Result};

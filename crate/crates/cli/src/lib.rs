//! Batch runner for rydchain experiments.
//!
//! A run reads a JSON [`config::ExperimentConfig`], simulates the requested
//! protocol and writes one CSV file per result quantity along with a
//! [`manifest::Manifest`] carrying checksums and the resolved configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod manifest;
pub mod run;
pub mod sweep;
pub mod table;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use run::{execute, mitigate_files, run, Artifact, Data, RunOptions, RunOutput};

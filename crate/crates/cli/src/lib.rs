//! Command-line front end for the krein spectral toolkit.
//!
//! A run is an [`ExperimentConfig`] (JSON file plus flag overrides) that is
//! validated, dispatched to the library and written as CSV or JSON with a
//! provenance header.

pub mod config;
pub mod error;
pub mod run;

pub use config::{validate, Diagnostic, ExperimentConfig, Format, Severity, Subcommand};
pub use error::CliError;
pub use run::{render, run, Artifact};

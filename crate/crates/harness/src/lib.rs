//! Harness for the DisCor lab: configuration, metrics CSV I/O and the `run`, `sweep`,
//! `verify` and `report` subcommands behind the `discor-lab` binary.

pub mod commands;
pub mod config;
pub mod csv;
mod error;

pub use error::{LabError, LabResult};

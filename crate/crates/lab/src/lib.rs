//! File formats, parallel execution and the command-line front end for
//! `deconfound-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod runner;

pub use crate::error::{LabError, Result};

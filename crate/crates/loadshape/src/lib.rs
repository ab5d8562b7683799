//! File formats and command line workflows on top of `loadshape-core`.
//!
//! Curves travel as CSV with the header `household_id,date,h00,...,h23`,
//! one row per household-day. Cluster models are JSON documents. Cluster
//! indices are numbered from 1 in every file and from 0 in the library.

pub mod cli;
pub mod error;
pub mod io;
pub mod model;

pub use error::{CliError, CliResult};

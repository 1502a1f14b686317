//! File formats, solver runs, synthetic problems and benchmark batches for the
//! `ttopt-qubo` command line tool.

pub mod bench;
pub mod error;
pub mod formats;
pub mod run;
pub mod synthetic;

pub use error::{CliError, CliResult};

//! Instance files, solver runs and the bench harness behind the `dualcert` binary.

pub mod bench;
pub mod config;
pub mod error;
pub mod instance;
pub mod run;

pub use error::CliError;

//! Command-line harness: configuration, log I/O, filter driving and Monte
//! Carlo evaluation.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod runner;
pub mod summary;

pub use cli::cli_run;
pub use error::HarnessError;

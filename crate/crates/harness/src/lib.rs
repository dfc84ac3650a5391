//! Library side of the `dynsbm` command-line tool: experiment configs,
//! seeded trial execution, reports and built-in figure bundles.

pub mod algorithms;
pub mod config;
pub mod figures;
pub mod reports;
pub mod runner;

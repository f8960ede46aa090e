//! Experiment harness for `noisy-slp`: JSON run configs, single solves,
//! multi-seed sweeps, the property suite and PGM image I/O.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod pgm;
pub mod run;
pub mod summary;
pub mod verify;

pub use config::RunConfig;
pub use error::{HarnessError, Result};

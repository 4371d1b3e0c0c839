//! Batch front-end for the crossbar simulator: file formats, network
//! loading, end-to-end runs, validation against the reference engine, and
//! synthetic workload generation.

pub mod error;
pub mod format;
pub mod manifest;
pub mod runner;
pub mod synth;

pub use error::CliError;
pub use runner::{run, simulate_network, validate, Backend, RunConfig};

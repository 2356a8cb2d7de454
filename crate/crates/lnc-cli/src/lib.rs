//! Library side of the `lnc` command-line tool: experiment configuration
//! and the frame-parallel Monte Carlo runner. The binary is a thin argument
//! layer over these modules, so integration tests (and the acceptance
//! suite) can drive whole experiments in-process.

pub mod config;
pub mod experiment;

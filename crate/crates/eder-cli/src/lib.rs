//! Library surface of the experiment harness, shared by the `eder` binary
//! and the acceptance test suite.

pub mod commands;
pub mod config;
pub mod metrics;

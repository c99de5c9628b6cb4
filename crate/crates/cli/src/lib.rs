//! Library surface of the experiment driver: configuration parsing and
//! the mode runners, shared by the binary and the integration tests.

pub mod config;
pub mod runs;

//! Brute-force reference models used by the test suites.
//!
//! Nothing here depends on the production crates: each model works on its own
//! small types and is checked against the real implementation by the tests.

pub mod graph;
pub mod policy;

//! Test-and-evaluation harness: corpus I/O, matcher sessions, reports and
//! the `mission-eval` command line.

pub mod brf;
pub mod conformance;
pub mod config;
pub mod corpus;
pub mod hs;
pub mod manifest;
pub mod pipeline;
pub mod profile;
pub mod records;
pub mod report;
pub mod schema;
pub mod scores;
pub mod segment;
pub mod session;
pub mod sigset;
pub mod svg;
pub mod wire;
pub mod xml;

//! Core algorithms for mission-based biometric evaluation.
//!
//! Everything here is pure computation over in-memory records. File formats,
//! the wire protocol and the command line live in the `mission-eval` crate.

#![no_std]
extern crate alloc;

pub mod classify;
pub mod curation;
pub mod metrics;
pub mod model;
pub mod observation;
pub mod partition;
pub mod payload;
pub mod pose;
pub mod rng;
pub mod selection;
pub mod split;
pub mod synth;
pub mod template;

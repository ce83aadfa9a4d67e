//! Nested biased random walks where each walk moves on the trace of the one
//! before it: analytic phase criterion, lazy nested simulation, regeneration
//! and trap analysis, and an electrical-network oracle.

// Errors carry inline lattice points, which are no larger than the values the
// fallible hot paths return.
#![allow(clippy::result_large_err)]

pub mod bias;
pub mod error;
pub mod experiments;
pub mod families;
pub mod lattice;
pub mod phase;
pub mod regeneration;
pub mod resistance;
pub mod rng;
pub mod stats;
pub mod trace;
pub mod walk;

pub use error::{Error, Result};

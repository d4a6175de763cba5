//! Detection of position-spoofing UAVs from range measurements.
//!
//! The pipeline: generate a swarm ([`swarm`]), inject an attack ([`attack`]), flag
//! inconsistent pairs ([`suspect`]), then clear suspects whose claims admit a
//! consistent embedding according to a semidefinite feasibility oracle ([`sdr`],
//! [`detect`]). [`metrics`] and [`harness`] run the experiments.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod detect;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod sdr;
pub mod suspect;
pub mod swarm;

pub use error::{Error, Result};

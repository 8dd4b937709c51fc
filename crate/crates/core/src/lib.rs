//! Simulation of bias-swept resonator spectra coupled to two-level-system
//! defects, and the analysis chain that recovers TLS dipoles, density and
//! loss from them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod density;
pub mod ensemble;
pub mod error;
pub mod hyperbola;
pub mod io;
pub mod loss;
pub mod lsq;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod units;

pub use error::{Error, Result};

//! Simulation of teleportation for pre-selected, post-selected and
//! pre-and-post-selected quantum states, port-based teleportation, and
//! instantaneous non-local measurement, checked against an independent
//! two-state-vector oracle.

pub mod appendix;
pub mod engine;
pub mod error;
pub mod limits;
pub mod nonlocal;
pub mod oracle;
pub mod pbt;
pub mod record;
pub mod stats;
pub mod teleport;

pub use error::{Result, SimError};

/// Normalisation tolerance.
pub const EPS_NORM: f64 = 1e-10;
/// Unitarity tolerance for `U†U = 𝟙`.
pub const EPS_UNITARY: f64 = 1e-9;
/// POVM completeness and positivity tolerance.
pub const EPS_POVM: f64 = 1e-8;
/// Probabilities below this are treated as zero.
pub const EPS_ZERO: f64 = 1e-12;

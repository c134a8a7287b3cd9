//! Bushes of nonlinear normal modes in the octahedral XY6 cluster.
//!
//! The crate is organised bottom-up:
//!
//! - [`symmetry`]: equilibrium geometry, the O_h action on displacement
//!   fields, the breathing / tetragonal / polar mode patterns and basis
//!   completion.
//! - [`potentials`]: pair potentials, the 7-atom cluster energy, and sparse
//!   polynomial potentials over bush amplitudes.
//! - [`dynamics`]: velocity Verlet for the full 18-DOF cluster and RK4 for
//!   reduced bush equations.
//! - [`fitting`]: grid sampling and least-squares reconstruction of reduced
//!   potentials, plus the forbidden-term audit.
//! - [`analysis`]: mode projections, closure residuals, frequency
//!   estimation, amplitude sweeps and harmonic frequencies.
//! - [`acceptance`]: the end-to-end checks behind `octabush check`.

pub mod acceptance;
pub mod analysis;
pub mod dynamics;
mod error;
pub mod fitting;
pub mod potentials;
pub mod symmetry;

pub use error::{Error, Result};

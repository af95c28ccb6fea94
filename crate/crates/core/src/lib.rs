//! System-level 3D stochastic MIMO channel simulator.
//!
//! The crate is organized bottom-up:
//!
//! - [`geom`]: coordinates, wave vectors, LOS geometry, field rotations
//! - [`antenna`]: element/port patterns, arrays, port virtualization
//! - [`lsp`]: pathloss, LOS probability, correlated large-scale parameters
//! - [`ssp`]: cluster delays, powers, angles, sub-paths, polarization
//! - [`synth`]: per-tap channel matrices
//! - [`deploy`]: hexagonal tri-sector layout and UE dropping
//! - [`calib`]: RSRP, attachment, coupling gain, geometry factor, spreads,
//!   eigenvalues, empirical CDFs
//! - [`config`] and [`campaign`]: run configuration and the batch driver

pub mod antenna;
pub mod calib;
pub mod campaign;
pub mod config;
pub mod deploy;
pub mod error;
pub mod geom;
pub mod linalg;
pub mod lsp;
pub mod rng;
pub mod ssp;
pub mod synth;

pub use error::{Error, Result};

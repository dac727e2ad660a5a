//! Link-level simulator and optimization library for stacked-metasurface
//! interference-exploitation precoding.
//!
//! A base station feeds finite-alphabet symbols, distorted by a Saleh power
//! amplifier, through a stack of transmissive metasurface layers. Each layer
//! applies a tunable unit-modulus phase shift per meta-atom; the stack acts
//! as an analog precoder. The library builds the physical channel stack,
//! maximizes the minimum constructive-interference safety margin with a
//! recursive oblique-manifold optimizer, jointly selects transmit antennas
//! and allocates power, and evaluates everything with Monte Carlo SER and
//! sum-rate sweeps against random-phase, quantized-phase, and zero-forcing
//! baselines.
//!
//! Entry points:
//! - [`config::ScenarioConfig`] describes an experiment.
//! - [`channel::ChannelSet::build`] constructs the propagation matrices.
//! - [`rom::rom`] optimizes the phase stack for one frame.
//! - [`ao::rom_ao`] adds greedy antenna selection and power allocation.
//! - [`eval::run_sweep`] runs Monte Carlo sweeps over SNR, layer count, or
//!   aperture size.

pub mod ao;
pub mod channel;
pub mod checks;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod manifold;
pub mod report;
pub mod rom;
pub mod seeding;
pub mod signal;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::SimError;

use num_complex::Complex64;

/// Complex dense matrix used throughout the channel and precoding code.
pub type CMat = nalgebra::DMatrix<Complex64>;
/// Complex dense vector.
pub type CVec = nalgebra::DVector<Complex64>;
/// Real dense matrix.
pub type RMat = nalgebra::DMatrix<f64>;
/// Real dense vector.
pub type RVec = nalgebra::DVector<f64>;

/// Speed of light in vacuum, m/s. Wavelengths are always derived from the
/// carrier frequency with this constant, never configured directly.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

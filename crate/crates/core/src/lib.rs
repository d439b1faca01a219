//! Simulation laboratory for the Y-00 quantum-noise randomized stream cipher.
//!
//! The transmit chain maps each data bit and running-key segment onto a
//! 2M-ary phase constellation, optionally randomizes the phase (DSR), and
//! passes it through a phase-noise channel. The attack side treats seed-key
//! recovery as decoding the running key observed through that memoryless
//! channel.

pub mod analysis;
pub mod attacks;
pub mod channel;
pub mod constellation;
pub mod dsr;
pub mod endpoints;
pub mod error;
pub mod gf2;
pub mod keystream;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use channel::{NoiseModel, Observation, PhaseNoise};
pub use dsr::DsrPolicy;
pub use constellation::{BasisIndex, ConstellationSpec, PhaseAngle, SignalPointIndex};
pub use error::{Error, Result};

//! Simulator for a pulsed type-I down-conversion source of heralded single
//! photons in BBO: phase matching, fiber acceptance, joint spectra, counting
//! statistics and two-photon interference.

pub mod cli;
pub mod counting;
pub mod dispersion;
pub mod error;
pub mod interference;
pub mod numeric;
pub mod optics;
pub mod phasematch;
pub mod spectrum;

pub use error::{Error, Result};

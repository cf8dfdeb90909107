//! Simulation and analysis kernels for the single-photon Fresnel-biprism
//! experiment.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs and a seed; file formats, configuration and the
//! command-line front end live in the `biprism` crate.
//!
//! Two halves:
//!
//! * which-path statistics: [`source`] generates photon emission events for a
//!   triggered single emitter or an attenuated laser, [`whichpath`] routes them
//!   onto two timestamping detectors, and [`coincidence`] computes the
//!   anticorrelation parameter, delay histograms and per-peak lifetime fits.
//! * fringe formation: [`optics`] propagates a Gaussian wavefront through a
//!   biprism with the band-limited angular-spectrum method, sums the
//!   polychromatic pattern and fits the observation distance; [`iccd`] samples
//!   single-photon impacts from that pattern and accumulates camera frames.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod coincidence;
pub mod error;
pub mod fft;
pub mod iccd;
pub mod lm;
pub mod optics;
pub mod rng;
pub mod source;
pub mod whichpath;

pub use error::{Error, Result};

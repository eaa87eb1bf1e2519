//! Digital twin of a membrane-in-the-middle optomechanics experiment.
//!
//! The crate is split along the physics:
//!
//! * [`optics`] – empty-cavity properties, Gaussian mode, membrane thin-film
//!   coefficients, MIM resonance spectra, vacuum coupling, clipping and tilt.
//! * [`backaction`] – intracavity photon number, optical damping and spring,
//!   steady-state phonon occupation and the PDH error signal.
//! * [`heating`] – optical absorption heating power laws.
//! * [`spectra`] – synthetic direct-detection PSDs and their text format.
//! * [`analysis`] – Lorentzian / PDH / power-law fits, g0 inference,
//!   sideband calibration and the cooling-series thermometry report.
//! * [`config`] – JSON run configuration and embedded presets.
//!
//! All angular quantities (`kappa`, `omega_*`, `gamma_*`, `g0`, detunings) are
//! in rad/s unless a name ends in `_hz`.

// `!(x > 0.0)` is the idiom for rejecting NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod backaction;
pub mod config;
pub mod constants;
mod error;
pub mod heating;
pub mod optics;
pub mod spectra;

pub use error::{Error, Result};

//! Emulation of molecular vibronic spectra on tuneable superconducting
//! resonator arrays.
//!
//! All quantities are stored in one internal unit system with `ħ = k_B = 1`:
//! energies in eV, lengths in Å, charges in units of `e`. The [`units`]
//! module converts to laboratory units at the boundary.

pub mod anharmonic;
pub mod emulator;
pub mod error;
pub mod linalg;
pub mod model;
pub mod quench;
pub mod readout;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};

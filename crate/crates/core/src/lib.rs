//! Surface phonon polaritons on a piezomagnetic superlattice and their
//! magnetic coupling to an NV-center spin ensemble.
//!
//! The crate is organised along the physics pipeline:
//!
//! * [`materials`]: superlattice parameters and the effective permeability tensor.
//! * [`dispersion`]: surface-mode wavenumbers, bound-segment detection, group velocity.
//! * [`quantization`]: energy densities, mode length and the per-photon field profile.
//! * [`spin_coupling`]: single-spin and collective coupling, cooperativity, period sweeps.
//! * [`dynamics`]: non-Hermitian eigenfrequencies, Lindblad evolution and storage.
//!
//! All quantities are SI; angular frequencies are in rad/s.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod constants;
pub mod dispersion;
pub mod dynamics;
mod error;
pub mod materials;
pub mod quantization;
pub mod spin_coupling;
pub mod table;

pub use error::{Error, Result};

//! Physical constants (CODATA 2018).

use std::f64::consts::PI;

/// Speed of light in vacuum [m/s], exact.
pub const C: f64 = 299_792_458.0;
/// Reduced Planck constant [J·s].
pub const HBAR: f64 = 1.054_571_817e-34;
/// Bohr magneton [J/T].
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Vacuum permeability [N/A²].
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// NV ground-state zero-field splitting [rad/s].
pub const NV_ZERO_FIELD_SPLITTING: f64 = 2.0 * PI * 2.87e9;
/// NV electron Landé factor.
pub const NV_G_FACTOR: f64 = 2.0;

/// Angular frequency [rad/s] to ordinary frequency [GHz].
pub fn to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e9)
}

//! Energy normalization of a bound surface mode and its per-photon field.
//!
//! Everything here works with the lossless permeabilities; damping enters
//! later only as a linewidth.

use num_complex::Complex64;
use serde::Serialize;

use crate::constants::{to_ghz, HBAR, MU_0};
use crate::dispersion::{wavenumbers, DispersionPoint};
use crate::materials::SuperlatticeSpec;
use crate::table::Table;
use crate::{Error, Result};

pub const CSV_COLUMNS: [&str; 8] = [
    "omega_rad_s",
    "freq_GHz",
    "F",
    "M",
    "L_mode_m",
    "ratio_Hx_H1z_sq",
    "ratio_Hx_H2z_sq",
    "kz_decay_vac",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeQuantization {
    pub omega: f64,
    pub f_val: f64,
    pub m_val: f64,
    /// Mode length 𝓛 [m].
    pub mode_length: f64,
    pub ratio_hx_h1z_sq: f64,
    pub ratio_hx_h2z_sq: f64,
    /// `Im k1z` [1/m].
    pub kz_decay_vac: f64,
    /// The lossless point the mode was quantized at.
    pub point: DispersionPoint,
}

/// Per-photon magnetic field above the interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSample {
    pub z: f64,
    /// `𝓛^{-1/2} e^{−Im(k1z) z} (1, −kp/k1z)` [m^{-1/2}].
    pub polarization: [Complex64; 2],
    /// `√(ħωμ₀/2)` times the polarization; divide by `√S` for the field [T].
    pub b_vec: [Complex64; 2],
}

impl FieldSample {
    pub fn b_norm(&self) -> f64 {
        (self.b_vec[0].norm_sqr() + self.b_vec[1].norm_sqr()).sqrt()
    }
}

/// Real lossless permeabilities of a bound point with `μ⊥ < 0`.
fn lossless_bound(point: &DispersionPoint) -> Result<(f64, f64)> {
    if !point.bound {
        return Err(Error::domain(format!(
            "omega = {:e} rad/s is not on the bound segment",
            point.omega
        )));
    }
    if point.mu_perp.im != 0.0 || point.mu_par.im != 0.0 {
        return Err(Error::domain(
            "quantization requires lossless permeabilities",
        ));
    }
    Ok((point.mu_perp.re, point.mu_par.re))
}

/// `(|Hx|²/|H1z|², |Hx|²/|H2z|²)` of a bound lossless point.
pub fn field_ratios(point: &DispersionPoint, eps2: f64) -> Result<(f64, f64)> {
    let (a, b) = lossless_bound(point)?;
    let r1 = -(1.0 - b * eps2) / (b * (eps2 - a));
    let r2 = b * b * r1;
    if !(r1.is_finite() && r2.is_finite() && r1 > 0.0 && r2 > 0.0) {
        return Err(Error::domain(format!(
            "non-positive field ratio at omega = {:e} rad/s",
            point.omega
        )));
    }
    Ok((r1, r2))
}

/// `|H1|²/|H2|²`, the vacuum to superlattice field-strength ratio at the interface.
pub fn interface_field_ratio(point: &DispersionPoint, eps2: f64) -> Result<f64> {
    let (a, b) = lossless_bound(point)?;
    let p = 2.0 * b * eps2 - a * b - 1.0;
    let q = (eps2 - a) - b * (1.0 - b * eps2);
    Ok(b * p / q)
}

/// The three contributions to `F`: non-dispersive, `∂μ⊥/∂ω` and `∂μ∥/∂ω` terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyTerms {
    pub static_part: f64,
    pub dispersive_perp: f64,
    pub dispersive_par: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.static_part + self.dispersive_perp + self.dispersive_par
    }
}

/// Term-by-term breakdown of `F` at a bound lossless point.
pub fn energy_terms(spec: &SuperlatticeSpec, point: &DispersionPoint) -> Result<EnergyTerms> {
    let (a, b) = lossless_bound(point)?;
    let eps2 = spec.material.eps2;
    let w = point.omega;
    let da = spec.perp().derivative(w);
    let db = spec.par().derivative(w);
    let p = 2.0 * b * eps2 - a * b - 1.0;
    Ok(EnergyTerms {
        static_part: (2.0 * a * b * (eps2 - a) - 2.0 * (eps2 - a)) / (a * p),
        dispersive_perp: w * b * (1.0 - b * eps2) * da / (a * b * p),
        dispersive_par: -w * (eps2 - a) * db / (a * b * p),
    })
}

/// Energy functions `(F, M)`: total mode energy per unit area in units of
/// `μ₀|H1|²/(8|k1z|)` and `μ₀|H2|²/(8|k2z|)` respectively.
pub fn energy_functions(spec: &SuperlatticeSpec, point: &DispersionPoint) -> Result<(f64, f64)> {
    let f = energy_terms(spec, point)?.total();
    let (a, b) = lossless_bound(point)?;
    let eps2 = spec.material.eps2;
    let w = point.omega;
    let da = spec.perp().derivative(w);
    let db = spec.par().derivative(w);
    let q = (eps2 - a) - b * (1.0 - b * eps2);
    let m = (2.0 * b * (eps2 - a) - 2.0 * b * b * a * (eps2 - a)) / q
        - w * b * (1.0 - b * eps2) * da / q
        + w * (eps2 - a) * db / q;
    if !(f.is_finite() && m.is_finite()) {
        return Err(Error::domain(format!(
            "energy functions diverge at omega = {w:e} rad/s"
        )));
    }
    Ok((f, m))
}

/// `𝓛 = [(μ∥ε₂−1) + μ∥(ε₂−μ⊥)] F / (4|k1z|(μ∥ε₂−1))`.
pub fn mode_length_formula(mu_perp: f64, mu_par: f64, eps2: f64, k1z_abs: f64, f_val: f64) -> f64 {
    let bracket = mu_par * eps2 - 1.0;
    (bracket + mu_par * (eps2 - mu_perp)) / (4.0 * k1z_abs * bracket) * f_val
}

pub fn mode_length(spec: &SuperlatticeSpec, point: &DispersionPoint) -> Result<f64> {
    let (a, b) = lossless_bound(point)?;
    let (f, _) = energy_functions(spec, point)?;
    let len = mode_length_formula(a, b, spec.material.eps2, point.k1z.norm(), f);
    if !(len.is_finite() && len > 0.0) {
        return Err(Error::domain(format!(
            "non-positive mode length at omega = {:e} rad/s",
            point.omega
        )));
    }
    Ok(len)
}

/// Quantize the lossless surface mode at `omega`.
pub fn quantize(spec: &SuperlatticeSpec, omega: f64) -> Result<ModeQuantization> {
    let point = wavenumbers(&spec.lossless(), omega)?;
    let (ratio_hx_h1z_sq, ratio_hx_h2z_sq) = field_ratios(&point, spec.material.eps2)?;
    let (f_val, m_val) = energy_functions(spec, &point)?;
    let mode_length = mode_length(spec, &point)?;
    Ok(ModeQuantization {
        omega,
        f_val,
        m_val,
        mode_length,
        ratio_hx_h1z_sq,
        ratio_hx_h2z_sq,
        kz_decay_vac: point.k1z.im,
        point,
    })
}

/// Per-photon field at height `z ≥ 0` above the interface.
pub fn b_field_profile(mode: &ModeQuantization, z: f64) -> Result<FieldSample> {
    if !(z >= 0.0) {
        return Err(Error::domain(format!("height must be >= 0, got {z}")));
    }
    let p = &mode.point;
    let envelope = (-p.k1z.im * z).exp() / mode.mode_length.sqrt();
    let polarization = [Complex64::new(envelope, 0.0), -p.kp / p.k1z * envelope];
    let scale = (HBAR * mode.omega * MU_0 / 2.0).sqrt();
    Ok(FieldSample {
        z,
        polarization,
        b_vec: [polarization[0] * scale, polarization[1] * scale],
    })
}

/// Time-averaged mode energy per unit interface area [J/m²] on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub vacuum: f64,
    pub superlattice: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.vacuum + self.superlattice
    }
}

/// Energy per area of a mode with amplitude `A`, integrated from the field
/// components on both sides (dispersive energy density in the superlattice).
///
/// The field normalization is `|Hx|² = 4|A|²/𝓛` at the interface.
pub fn energy_per_area(
    spec: &SuperlatticeSpec,
    mode: &ModeQuantization,
    amplitude: Complex64,
) -> EnergyBreakdown {
    let p = &mode.point;
    let w = mode.omega;
    let (k1, k2) = (p.k1z.norm(), p.k2z.norm());
    let hx_sq = 4.0 * amplitude.norm_sqr() / mode.mode_length;
    let h1z_sq = hx_sq / mode.ratio_hx_h1z_sq;
    let h2z_sq = hx_sq / mode.ratio_hx_h2z_sq;
    // ε₀|E|²/μ₀, from Faraday's law on the vacuum side; E_y is continuous.
    let e_sq = p.k0() * p.k0() * hx_sq / (k1 * k1);
    let mu_x = p.mu_perp.re + w * spec.perp().derivative(w);
    let mu_z = p.mu_par.re + w * spec.par().derivative(w);
    EnergyBreakdown {
        vacuum: MU_0 * (hx_sq + h1z_sq + e_sq) / (8.0 * k1),
        superlattice: MU_0 * (spec.material.eps2 * e_sq + mu_x * hx_sq + mu_z * h2z_sq)
            / (8.0 * k2),
    }
}

/// Fraction of the mode energy stored in the vacuum half-space.
pub fn vacuum_energy_fraction(mode: &ModeQuantization) -> f64 {
    let p = &mode.point;
    let k0sq = p.k0() * p.k0();
    let electric = k0sq / (p.kp.norm_sqr() + p.k1z.norm_sqr());
    (1.0 + electric) / mode.f_val
}

pub fn mode_table(modes: &[ModeQuantization]) -> Table {
    let mut table = Table::new(&CSV_COLUMNS);
    for m in modes {
        table.push_row(vec![
            m.omega.into(),
            to_ghz(m.omega).into(),
            m.f_val.into(),
            m.m_val.into(),
            m.mode_length.into(),
            m.ratio_hx_h1z_sq.into(),
            m.ratio_hx_h2z_sq.into(),
            m.kz_decay_vac.into(),
        ]);
    }
    table
}

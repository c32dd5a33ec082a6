//! Material parameters and the effective permeability of a piezomagnetic
//! superlattice.
//!
//! Each principal direction of the superlattice responds like a Lorentz
//! oscillator: the permeability is `μ_s (ω_o² − ω²) / (ω_L² − ω²)`, negative
//! between the transverse resonance `ω_L` and the zero `ω_o`. Damping enters as
//! `−iκω` in both numerator and denominator.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::MU_0;
use crate::{Error, Result};

/// Default relative pole guard around `ω_L` for lossless evaluation.
pub const DEFAULT_POLE_GUARD: f64 = 1e-12;

/// Damping used by [`SuperlatticeSpec::with_lossy_default`], as a fraction of `ω⊥L`.
pub const LOSSY_DEFAULT_FRACTION: f64 = 1e-3;

const REQUIRED_KEYS: [&str; 8] = [
    "rho", "c11", "c33", "q31", "q33", "mu11_s", "mu33_s", "eps2",
];

/// Bulk parameters of the piezomagnetic material.
///
/// Static permeabilities are absolute (same unit as `μ₀`); everything the
/// crate returns is relative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub name: Option<String>,
    /// Mass density [kg/m³].
    pub rho: f64,
    /// Elastic constants [N/m²].
    pub c11: f64,
    pub c33: f64,
    /// Piezomagnetic coefficients [N/(A·m)].
    pub q31: f64,
    pub q33: f64,
    /// Static absolute permeabilities [N/A²].
    pub mu11_s: f64,
    pub mu33_s: f64,
    /// Relative dielectric constant.
    pub eps2: f64,
}

impl MaterialParams {
    /// Terfenol-D.
    pub fn terfenol_d() -> Self {
        MaterialParams {
            name: Some("terfenol-d".to_string()),
            rho: 9.23e3,
            c11: 5.5e10,
            c33: 5.5e10,
            q31: -200.0,
            q33: 400.0,
            mu11_s: 6.23e-6,
            mu33_s: 6.23e-6,
            eps2: 1e3,
        }
    }

    /// Built-in presets by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "terfenol-d" | "terfenol_d" | "terfenold" => Some(Self::terfenol_d()),
            _ => None,
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["terfenol-d"]
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_lines(&|_| None)
    }

    fn validate_with_lines(&self, line_of: &dyn Fn(&str) -> Option<usize>) -> Result<()> {
        let fail = |field: &str, message: &str| Error::Validation {
            field: field.to_string(),
            line: line_of(field),
            message: message.to_string(),
        };
        let positive = [
            ("rho", self.rho),
            ("c11", self.c11),
            ("c33", self.c33),
            ("mu11_s", self.mu11_s),
            ("mu33_s", self.mu33_s),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(fail(field, &format!("must be finite and > 0, got {value}")));
            }
        }
        for (field, value) in [("q31", self.q31), ("q33", self.q33)] {
            if !value.is_finite() {
                return Err(fail(field, "must be finite"));
            }
        }
        if !(self.eps2.is_finite() && self.eps2 >= 1.0) {
            return Err(fail(
                "eps2",
                &format!("must be finite and >= 1, got {}", self.eps2),
            ));
        }
        Ok(())
    }

    /// Serialize to the flat `key = value` config format read by [`load_material`].
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        if let Some(name) = &self.name {
            let _ = writeln!(out, "name = {name}");
        }
        for (key, value) in self.fields() {
            let _ = writeln!(out, "{key} = {value:e}");
        }
        out
    }

    fn fields(&self) -> [(&'static str, f64); 8] {
        [
            ("rho", self.rho),
            ("c11", self.c11),
            ("c33", self.c33),
            ("q31", self.q31),
            ("q33", self.q33),
            ("mu11_s", self.mu11_s),
            ("mu33_s", self.mu33_s),
            ("eps2", self.eps2),
        ]
    }
}

/// Parse a material from flat `key = value` text (`#` starts a comment).
///
/// Required keys: `rho, c11, c33, q31, q33, mu11_s, mu33_s, eps2`; optional `name`.
pub fn load_material(source: &str) -> Result<MaterialParams> {
    let mut values: Vec<(String, f64, usize)> = Vec::new();
    let mut name: Option<String> = None;

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key == "name" {
            if name.is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "duplicate key `name`".into(),
                });
            }
            name = Some(value.to_string());
            continue;
        }
        if !REQUIRED_KEYS.contains(&key) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unknown key `{key}`"),
            });
        }
        if values.iter().any(|(k, _, _)| k == key) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
        let parsed: f64 = value.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("`{key}`: cannot parse `{value}` as a number"),
        })?;
        values.push((key.to_string(), parsed, line_no));
    }

    let get = |key: &str| -> Result<f64> {
        values
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| *v)
            .ok_or_else(|| Error::Validation {
                field: key.to_string(),
                line: None,
                message: "missing required key".into(),
            })
    };

    let material = MaterialParams {
        name,
        rho: get("rho")?,
        c11: get("c11")?,
        c33: get("c33")?,
        q31: get("q31")?,
        q33: get("q33")?,
        mu11_s: get("mu11_s")?,
        mu33_s: get("mu33_s")?,
        eps2: get("eps2")?,
    };
    let line_of = |field: &str| {
        values
            .iter()
            .find(|(k, _, _)| k == field)
            .map(|(_, _, l)| *l)
    };
    material.validate_with_lines(&line_of)?;
    Ok(material)
}

/// One principal component of the superlattice permeability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzResponse {
    /// Static permeability relative to `μ₀`.
    pub static_rel: f64,
    /// Transverse resonance (pole) [rad/s].
    pub omega_l: f64,
    /// Zero of the lossless response [rad/s].
    pub omega_o: f64,
    /// `ω_o² − ω_L²`, kept separately to avoid cancellation.
    pub gap_sq: f64,
}

impl LorentzResponse {
    fn new(mu_static: f64, elastic: f64, piezo: f64, rho: f64, d: f64) -> Self {
        let omega_l_sq = elastic * std::f64::consts::PI.powi(2) / (rho * d * d);
        let gap_sq = piezo * piezo / (d * d * rho * mu_static);
        LorentzResponse {
            static_rel: mu_static / MU_0,
            omega_l: omega_l_sq.sqrt(),
            omega_o: (omega_l_sq + gap_sq).sqrt(),
            gap_sq,
        }
    }

    /// Relative permeability. `kappa = 0` gives an exactly real result.
    pub fn value(&self, omega: f64, kappa: f64) -> Complex64 {
        let num_re = (self.omega_o - omega) * (self.omega_o + omega);
        let den_re = (self.omega_l - omega) * (self.omega_l + omega);
        if kappa == 0.0 {
            return Complex64::new(self.static_rel * num_re / den_re, 0.0);
        }
        let loss = kappa * omega;
        self.static_rel * Complex64::new(num_re, -loss) / Complex64::new(den_re, -loss)
    }

    /// `∂μ/∂ω` of the lossless response.
    pub fn derivative(&self, omega: f64) -> f64 {
        let den = (self.omega_l - omega) * (self.omega_l + omega);
        self.static_rel * 2.0 * omega * self.gap_sq / (den * den)
    }
}

/// A semi-infinite superlattice with domain half-period `d` (period `2d`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperlatticeSpec {
    pub material: MaterialParams,
    /// Domain half-period [m].
    pub d: f64,
    /// Material damping constant κ [rad/s].
    pub kappa_damp: f64,
    /// Relative exclusion zone around `ω_L` when lossless.
    pub pole_guard: f64,
}

impl SuperlatticeSpec {
    pub fn new(material: MaterialParams, d: f64, kappa_damp: f64) -> Result<Self> {
        material.validate()?;
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::validation("d", format!("must be > 0, got {d}")));
        }
        if !(kappa_damp.is_finite() && kappa_damp >= 0.0) {
            return Err(Error::validation(
                "kappa_damp",
                format!("must be >= 0, got {kappa_damp}"),
            ));
        }
        Ok(SuperlatticeSpec {
            material,
            d,
            kappa_damp,
            pole_guard: DEFAULT_POLE_GUARD,
        })
    }

    pub fn with_pole_guard(mut self, guard: f64) -> Self {
        self.pole_guard = guard;
        self
    }

    pub fn with_kappa(mut self, kappa_damp: f64) -> Self {
        self.kappa_damp = kappa_damp;
        self
    }

    /// Damping `κ = 0.001·ω⊥L`.
    pub fn with_lossy_default(self) -> Self {
        let kappa = LOSSY_DEFAULT_FRACTION * self.perp().omega_l;
        self.with_kappa(kappa)
    }

    /// Same superlattice without damping.
    pub fn lossless(&self) -> Self {
        self.clone().with_kappa(0.0)
    }

    pub fn is_lossless(&self) -> bool {
        self.kappa_damp == 0.0
    }

    /// Period `L = 2d` [m].
    pub fn period(&self) -> f64 {
        2.0 * self.d
    }

    pub fn perp(&self) -> LorentzResponse {
        let m = &self.material;
        LorentzResponse::new(m.mu11_s, m.c11, m.q31, m.rho, self.d)
    }

    pub fn par(&self) -> LorentzResponse {
        let m = &self.material;
        LorentzResponse::new(m.mu33_s, m.c33, m.q33, m.rho, self.d)
    }

    pub fn resonances(&self) -> Resonances {
        resonance_frequencies(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonances {
    pub omega_perp_l: f64,
    pub omega_perp_o: f64,
    pub omega_par_l: f64,
    pub omega_par_o: f64,
}

impl Resonances {
    /// Centre of the negative-μ⊥ window.
    pub fn perp_midgap(&self) -> f64 {
        0.5 * (self.omega_perp_l + self.omega_perp_o)
    }
}

/// Both permeability components at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Permeability {
    pub mu_perp: Complex64,
    pub mu_par: Complex64,
    pub omega: f64,
}

pub fn resonance_frequencies(spec: &SuperlatticeSpec) -> Resonances {
    let perp = spec.perp();
    let par = spec.par();
    Resonances {
        omega_perp_l: perp.omega_l,
        omega_perp_o: perp.omega_o,
        omega_par_l: par.omega_l,
        omega_par_o: par.omega_o,
    }
}

fn evaluate(spec: &SuperlatticeSpec, branch: LorentzResponse, omega: f64) -> Result<Complex64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::domain(format!("omega must be > 0, got {omega}")));
    }
    if spec.is_lossless() && ((omega - branch.omega_l) / branch.omega_l).abs() < spec.pole_guard {
        return Err(Error::Pole {
            omega,
            resonance: branch.omega_l,
        });
    }
    Ok(branch.value(omega, spec.kappa_damp))
}

/// Relative permeability perpendicular to the optic axis.
pub fn mu_perp(spec: &SuperlatticeSpec, omega: f64) -> Result<Complex64> {
    evaluate(spec, spec.perp(), omega)
}

/// Relative permeability along the optic axis.
pub fn mu_par(spec: &SuperlatticeSpec, omega: f64) -> Result<Complex64> {
    evaluate(spec, spec.par(), omega)
}

pub fn permeability(spec: &SuperlatticeSpec, omega: f64) -> Result<Permeability> {
    Ok(Permeability {
        mu_perp: mu_perp(spec, omega)?,
        mu_par: mu_par(spec, omega)?,
        omega,
    })
}

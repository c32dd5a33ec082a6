//! Magnetic coupling between NV spins and a quantized surface mode.
//!
//! Couplings are area-normalized: `g` is quoted per `√S`, and the ensemble
//! coupling combines it with `√(n S h)` so the quantization area cancels.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, MU_0, MU_B, NV_G_FACTOR, NV_ZERO_FIELD_SPLITTING};
use crate::dispersion::bound_segment;
use crate::materials::{MaterialParams, SuperlatticeSpec};
use crate::quantization::{quantize, ModeQuantization};
use crate::table::Table;
use crate::{Error, Result};

/// Validity ratio above which the two-level reduction is flagged.
pub const VALIDITY_WARNING: f64 = 0.1;

const ARGMAX_GRID: usize = 200;
const ARGMAX_REL_TOL: f64 = 1e-9;

pub const SWEEP_COLUMNS: [&str; 7] = [
    "period_m",
    "omega_eval_rad_s",
    "G_rad_s",
    "gamma_s_rad_s",
    "kappa_rad_s",
    "C",
    "strong_coupling",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NvParams {
    /// Zero-field splitting [rad/s].
    pub d_zfs: f64,
    pub g_s: f64,
    /// Bohr magneton [J/T].
    pub mu_b: f64,
    /// Static bias field [T].
    pub b_z: f64,
}

impl Default for NvParams {
    fn default() -> Self {
        NvParams {
            d_zfs: NV_ZERO_FIELD_SPLITTING,
            g_s: NV_G_FACTOR,
            mu_b: MU_B,
            b_z: 0.0,
        }
    }
}

impl NvParams {
    pub fn with_field(mut self, b_z: f64) -> Self {
        self.b_z = b_z;
        self
    }

    /// Zeeman splitting `Δ = 2 μ_B g_s B_z / ħ` between `|±1⟩`.
    pub fn splitting(&self) -> f64 {
        2.0 * self.mu_b * self.g_s * self.b_z / HBAR
    }

    /// Transition frequency of `|0⟩ ↔ |+1⟩`.
    pub fn omega0(&self) -> f64 {
        self.d_zfs + self.splitting() / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinEnsembleSpec {
    /// NV volume density [1/m³].
    pub n: f64,
    /// Slab thickness [m].
    pub h: f64,
    /// Slab extent along the propagation direction [m].
    pub l: f64,
    /// Spin dephasing rate [rad/s].
    pub gamma_s: f64,
    /// Fraction of spins resonant with the mode.
    pub resonant_fraction: f64,
}

impl SpinEnsembleSpec {
    pub fn new(n: f64, h: f64, l: f64, gamma_s: f64) -> Result<Self> {
        let ens = SpinEnsembleSpec {
            n,
            h,
            l,
            gamma_s,
            resonant_fraction: 0.25,
        };
        ens.validate()?;
        Ok(ens)
    }

    pub fn with_fraction(mut self, fraction: f64) -> Result<Self> {
        self.resonant_fraction = fraction;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(field, format!("must be > 0, got {v}")))
            }
        };
        positive("n", self.n)?;
        positive("h", self.h)?;
        positive("l", self.l)?;
        if !(self.gamma_s.is_finite() && self.gamma_s >= 0.0) {
            return Err(Error::validation(
                "gamma_s",
                format!("must be >= 0, got {}", self.gamma_s),
            ));
        }
        let f = self.resonant_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::validation(
                "resonant_fraction",
                format!("must lie in (0, 1], got {f}"),
            ));
        }
        Ok(())
    }
}

/// Two damped oscillators: the collective spin mode and the surface mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledSystem {
    pub omega_spin: f64,
    pub omega_mode: f64,
    pub g: f64,
    pub gamma_s: f64,
    pub kappa_sphp: f64,
}

impl CoupledSystem {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("G", self.g),
            ("gamma_s", self.gamma_s),
            ("kappa_sphp", self.kappa_sphp),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(field, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `G > max(γ_s, κ)`.
    pub fn strong_coupling(&self) -> bool {
        self.g > self.gamma_s.max(self.kappa_sphp)
    }

    pub fn detuning(&self) -> f64 {
        self.omega_spin - self.omega_mode
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeemanTuning {
    /// Bias field bringing `|0⟩ ↔ |+1⟩` onto the mode [T].
    pub b_z: f64,
    /// `|Δ/2 + D − ω| / (Δ/2)` at that field.
    pub validity: f64,
    /// Set when the validity ratio exceeds [`VALIDITY_WARNING`].
    pub warning: bool,
}

/// Two-level validity ratio `|Δ/2 + D − ω| / (Δ/2)` at the current bias field.
pub fn two_level_validity(nv: &NvParams, omega_mode: f64) -> f64 {
    let half = nv.splitting() / 2.0;
    (half + nv.d_zfs - omega_mode).abs() / half
}

/// Bias field that tunes the `|+1⟩` transition to `omega_mode`.
pub fn zeeman_resonance(nv: &NvParams, omega_mode: f64) -> Result<ZeemanTuning> {
    if !(omega_mode > nv.d_zfs) {
        return Err(Error::domain(format!(
            "mode frequency {omega_mode:e} rad/s must exceed the zero-field splitting {:e} rad/s",
            nv.d_zfs
        )));
    }
    let b_z = HBAR * (omega_mode - nv.d_zfs) / (nv.mu_b * nv.g_s);
    let validity = two_level_validity(&nv.with_field(b_z), omega_mode);
    Ok(ZeemanTuning {
        b_z,
        validity,
        warning: validity > VALIDITY_WARNING,
    })
}

fn g_at(mode: &ModeQuantization, nv: &NvParams, z: f64) -> f64 {
    nv.mu_b * nv.g_s / 2.0
        * (mode.omega * MU_0 / (HBAR * mode.mode_length)).sqrt()
        * (-mode.kz_decay_vac * z).exp()
}

/// Single-spin coupling at height `z0` [rad/s · m].
pub fn g_single(mode: &ModeQuantization, nv: &NvParams, z0: f64) -> Result<f64> {
    if !(z0 >= 0.0) {
        return Err(Error::domain(format!("spin height must be >= 0, got {z0}")));
    }
    Ok(g_at(mode, nv, z0))
}

/// Collective coupling of a slab of thickness `h` on the interface (closed form).
pub fn g_collective(mode: &ModeQuantization, nv: &NvParams, ens: &SpinEnsembleSpec) -> Result<f64> {
    ens.validate()?;
    let kz = mode.kz_decay_vac;
    if !(kz > 0.0) {
        return Err(Error::domain("mode does not decay away from the interface"));
    }
    let depth = -(-2.0 * kz * ens.h).exp_m1() / (2.0 * kz);
    Ok(ens.resonant_fraction.sqrt() * g_at(mode, nv, 0.0) * (ens.n * depth).sqrt())
}

/// Same as [`g_collective`] with the depth integral done by adaptive quadrature.
pub fn g_collective_by_quadrature(
    mode: &ModeQuantization,
    nv: &NvParams,
    ens: &SpinEnsembleSpec,
) -> Result<f64> {
    ens.validate()?;
    let g0 = g_at(mode, nv, 0.0);
    let out = quadrature::double_exponential::integrate(
        |z| (g_at(mode, nv, z) / g0).powi(2),
        0.0,
        ens.h,
        1e-15 * ens.h,
    );
    Ok(ens.resonant_fraction.sqrt() * g0 * (ens.n * out.integral).sqrt())
}

/// Normalized overlap `(1/N) Σ exp(i (kp_b − kp_a) x)` of two spin-wave modes.
pub fn mode_overlap(positions: &[f64], kp_a: f64, kp_b: f64) -> Result<Complex64> {
    if positions.is_empty() {
        return Err(Error::validation(
            "positions",
            "at least one spin is required",
        ));
    }
    let dk = kp_b - kp_a;
    let sum: Complex64 = positions
        .iter()
        .map(|&x| Complex64::from_polar(1.0, dk * x))
        .sum();
    let d = sum / positions.len() as f64;
    let norm = d.norm();
    Ok(if norm > 1.0 { d / norm } else { d })
}

/// `n` uniform positions on `[−l/2, l/2)` from a seeded generator.
pub fn sample_positions(n: usize, l: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-l / 2.0..l / 2.0)).collect()
}

/// `n` positions spaced by `l/n` starting at `−l/2`.
pub fn equally_spaced_positions(n: usize, l: f64) -> Vec<f64> {
    (0..n).map(|i| -l / 2.0 + l * i as f64 / n as f64).collect()
}

/// Dipolar dephasing scale `μ₀ g_s² μ_B² n_N / (4πħ)` for impurity density `n_N` [1/m³].
pub fn dephasing_estimate(n_n: f64) -> Result<f64> {
    if !(n_n.is_finite() && n_n > 0.0) {
        return Err(Error::domain(format!(
            "impurity density must be > 0, got {n_n}"
        )));
    }
    Ok(MU_0 * NV_G_FACTOR.powi(2) * MU_B.powi(2) * n_n / (4.0 * std::f64::consts::PI * HBAR))
}

/// `C = G² / (γ_s κ)`.
pub fn cooperativity(sys: &CoupledSystem) -> Result<f64> {
    sys.validate()?;
    if !(sys.gamma_s > 0.0 && sys.kappa_sphp > 0.0) {
        return Err(Error::domain(
            "cooperativity needs positive gamma_s and kappa_sphp",
        ));
    }
    Ok(sys.g * sys.g / (sys.gamma_s * sys.kappa_sphp))
}

/// Frequency on the bound segment where the collective coupling peaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalCoupling {
    pub omega: f64,
    pub g: f64,
}

/// Maximize `G(ω)` over the bound segment: grid search, then golden section.
pub fn optimal_coupling(
    spec: &SuperlatticeSpec,
    nv: &NvParams,
    ens: &SpinEnsembleSpec,
) -> Result<OptimalCoupling> {
    ens.validate()?;
    let seg = bound_segment(&spec.lossless())
        .ok_or_else(|| Error::OutOfRange("no bound segment for this superlattice".into()))?;
    let g_of = |w: f64| {
        quantize(spec, w)
            .and_then(|m| g_collective(&m, nv, ens))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let grid: Vec<f64> = (0..ARGMAX_GRID)
        .map(|i| seg.at((i as f64 + 0.5) / ARGMAX_GRID as f64))
        .collect();
    let values: Vec<f64> = grid.iter().map(|&w| g_of(w)).collect();
    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("grid is nonempty");
    if values[best] == f64::NEG_INFINITY {
        return Err(Error::domain("coupling undefined across the bound segment"));
    }

    let mut a = if best == 0 {
        seg.omega_lo
    } else {
        grid[best - 1]
    };
    let mut b = if best + 1 == ARGMAX_GRID {
        seg.omega_hi
    } else {
        grid[best + 1]
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (g_of(x1), g_of(x2));
    while b - a > ARGMAX_REL_TOL * b {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = g_of(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = g_of(x2);
        }
    }
    let omega = 0.5 * (a + b);
    let g = g_of(omega).max(values[best]);
    let omega = if g == values[best] { grid[best] } else { omega };
    Ok(OptimalCoupling { omega, g })
}

/// How the surface-mode linewidth is chosen for each period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KappaRule {
    /// `κ = f · ω⊥L(d)`.
    FractionOfPerpL(f64),
    /// A fixed rate [rad/s].
    Fixed(f64),
}

impl KappaRule {
    pub fn kappa(&self, spec: &SuperlatticeSpec) -> f64 {
        match *self {
            KappaRule::FractionOfPerpL(f) => f * spec.perp().omega_l,
            KappaRule::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub period: f64,
    pub omega_eval: f64,
    pub g: f64,
    pub gamma_s: f64,
    pub kappa: f64,
    pub cooperativity: f64,
    pub strong_coupling: bool,
    /// No bound segment at this period; numeric fields are NaN.
    pub skipped: bool,
}

fn sweep_row(
    material: &MaterialParams,
    d: f64,
    nv: &NvParams,
    ens: &SpinEnsembleSpec,
    rule: KappaRule,
) -> Result<SweepRow> {
    let spec = SuperlatticeSpec::new(material.clone(), d, 0.0)?;
    let kappa = rule.kappa(&spec);
    let opt = match optimal_coupling(&spec, nv, ens) {
        Ok(opt) => opt,
        Err(Error::OutOfRange(_)) => {
            return Ok(SweepRow {
                period: spec.period(),
                omega_eval: f64::NAN,
                g: f64::NAN,
                gamma_s: ens.gamma_s,
                kappa,
                cooperativity: f64::NAN,
                strong_coupling: false,
                skipped: true,
            })
        }
        Err(e) => return Err(e),
    };
    let sys = CoupledSystem {
        omega_spin: opt.omega,
        omega_mode: opt.omega,
        g: opt.g,
        gamma_s: ens.gamma_s,
        kappa_sphp: kappa,
    };
    Ok(SweepRow {
        period: spec.period(),
        omega_eval: opt.omega,
        g: opt.g,
        gamma_s: ens.gamma_s,
        kappa,
        cooperativity: cooperativity(&sys)?,
        strong_coupling: sys.strong_coupling(),
        skipped: false,
    })
}

/// Cooperativity at the optimal frequency for each half-period in `d_values`.
pub fn sweep_cooperativity_vs_period(
    material: &MaterialParams,
    d_values: &[f64],
    nv: &NvParams,
    ens: &SpinEnsembleSpec,
    rule: KappaRule,
) -> Result<Vec<SweepRow>> {
    if d_values.is_empty() {
        return Err(Error::validation("d_range", "no periods to sweep"));
    }
    d_values
        .par_iter()
        .map(|&d| sweep_row(material, d, nv, ens, rule))
        .collect()
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut table = Table::new(&SWEEP_COLUMNS);
    let skipped: Vec<String> = rows
        .iter()
        .filter(|r| r.skipped)
        .map(|r| format!("{:e}", r.period))
        .collect();
    table.note("omega_eval", "argmax of G over the bound segment");
    if !skipped.is_empty() {
        table.note("skipped_periods_m", skipped.join(" "));
    }
    for r in rows {
        table.push_row(vec![
            r.period.into(),
            r.omega_eval.into(),
            r.g.into(),
            r.gamma_s.into(),
            r.kappa.into(),
            r.cooperativity.into(),
            r.strong_coupling.into(),
        ]);
    }
    table
}

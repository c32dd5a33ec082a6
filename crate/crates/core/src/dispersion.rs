//! Surface-mode dispersion at the vacuum / superlattice interface.
//!
//! The vacuum occupies z > 0 and the superlattice z < 0. Fields vary as
//! `exp(i(kp x + kz z − ω t))`, so a mode is localized when `Im k1z > 0`
//! on the vacuum side and `Im k2z < 0` inside the superlattice.

use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{to_ghz, C};
use crate::materials::{permeability, Permeability, SuperlatticeSpec};
use crate::table::{Cell, Table};
use crate::{Error, Result};

/// Relative distance of `1 − μ⊥μ∥` from zero below which the branch is degenerate.
pub const BRANCH_GUARD: f64 = 1e-10;
/// `Re kp` must exceed the light line by this relative margin to count as bound.
pub const LIGHT_LINE_MARGIN: f64 = 1e-9;
/// Largest `|Re k1z| / |Im k1z|` accepted for an evanescent lossless mode.
pub const EVANESCENT_TOL: f64 = 1e-6;
/// Largest `Im kp / Re kp` accepted for a bound damped mode.
pub const LOSSY_ATTENUATION_LIMIT: f64 = 0.5;

/// Fraction of the bound segment, next to the asymptote, where `kp` exceeds `10³ ω/c`.
pub const ASYMPTOTE_GUARD_BAND: f64 = 1e-5;

const SEGMENT_SCAN_POINTS: usize = 4096;

pub const CSV_COLUMNS: [&str; 13] = [
    "omega_rad_s",
    "freq_GHz",
    "kp_re",
    "kp_im",
    "k1z_re",
    "k1z_im",
    "k2z_re",
    "k2z_im",
    "mu_perp_re",
    "mu_perp_im",
    "mu_par_re",
    "mu_par_im",
    "bound",
];

/// Why a traced grid point carries no wavenumbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PointFlag {
    Ok,
    Pole,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub omega: f64,
    pub kp: Complex64,
    pub k1z: Complex64,
    pub k2z: Complex64,
    pub mu_perp: Complex64,
    pub mu_par: Complex64,
    pub bound: bool,
    pub flag: PointFlag,
}

impl DispersionPoint {
    fn flagged(omega: f64, flag: PointFlag) -> Self {
        let nan = Complex64::new(f64::NAN, f64::NAN);
        DispersionPoint {
            omega,
            kp: nan,
            k1z: nan,
            k2z: nan,
            mu_perp: nan,
            mu_par: nan,
            bound: false,
            flag,
        }
    }

    pub fn k0(&self) -> f64 {
        self.omega / C
    }

    /// In-plane wavelength `2π / Re kp`.
    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.kp.re
    }

    /// Residual of `kp² + k1z² = k0²`, relative to the magnitude of the terms.
    ///
    /// Near the asymptote `kp²` and `k1z²` nearly cancel, so normalizing by
    /// `k0²` alone would only measure that cancellation.
    pub fn vacuum_residual(&self) -> f64 {
        let k0sq = self.k0() * self.k0();
        let (a, b) = (self.kp * self.kp, self.k1z * self.k1z);
        (a + b - k0sq).norm() / (a.norm() + b.norm() + k0sq)
    }

    /// Residual of `kp²/μ∥ + k2z²/μ⊥ = ε2 k0²`, relative to the magnitude of the terms.
    pub fn medium_residual(&self, eps2: f64) -> f64 {
        let rhs = eps2 * self.k0() * self.k0();
        let a = self.kp * self.kp / self.mu_par;
        let b = self.k2z * self.k2z / self.mu_perp;
        (a + b - rhs).norm() / (a.norm() + b.norm() + rhs.abs())
    }

    fn csv_row(&self) -> Vec<Cell> {
        vec![
            self.omega.into(),
            to_ghz(self.omega).into(),
            self.kp.re.into(),
            self.kp.im.into(),
            self.k1z.re.into(),
            self.k1z.im.into(),
            self.k2z.re.into(),
            self.k2z.im.into(),
            self.mu_perp.re.into(),
            self.mu_perp.im.into(),
            self.mu_par.re.into(),
            self.mu_par.im.into(),
            self.bound.into(),
        ]
    }
}

/// Root with `Re ≥ 0` (forward propagation along +x).
fn forward_root(z: Complex64) -> Complex64 {
    let r = z.sqrt();
    if r.re < 0.0 || (r.re == 0.0 && r.im < 0.0) {
        -r
    } else {
        r
    }
}

/// Root with `Im ≥ 0` (decay into the vacuum half-space).
fn upper_root(z: Complex64) -> Complex64 {
    let r = z.sqrt();
    if r.im < 0.0 || (r.im == 0.0 && r.re < 0.0) {
        -r
    } else {
        r
    }
}

fn classify(lossless: bool, k0: f64, kp: Complex64, k1z: Complex64, k2z: Complex64) -> bool {
    let decays = k1z.im > 0.0 && k2z.im < 0.0;
    if !decays {
        return false;
    }
    if lossless {
        kp.re > k0 * (1.0 + LIGHT_LINE_MARGIN) && k1z.re.abs() < EVANESCENT_TOL * k1z.im.abs()
    } else {
        kp.re > k0 && kp.im / kp.re < LOSSY_ATTENUATION_LIMIT
    }
}

/// Wavenumbers of the surface mode at `omega`.
///
/// `k2z` follows from continuity of the normal flux density, `k2z = μ⊥ k1z`,
/// which fixes its sign once the vacuum branch is chosen.
pub fn wavenumbers(spec: &SuperlatticeSpec, omega: f64) -> Result<DispersionPoint> {
    let Permeability {
        mu_perp, mu_par, ..
    } = permeability(spec, omega)?;
    let k0 = omega / C;
    let k0sq = k0 * k0;
    let eps2 = spec.material.eps2;

    let product = mu_perp * mu_par;
    let den = Complex64::new(1.0, 0.0) - product;
    if den.norm() < BRANCH_GUARD * product.norm().max(1.0) {
        return Err(Error::BranchDegenerate { omega });
    }
    let kp_sq = (eps2 - mu_perp) * mu_par / den * k0sq;
    let k1z_sq = (1.0 - mu_par * eps2) / den * k0sq;

    let kp = forward_root(kp_sq);
    let k1z = upper_root(k1z_sq);
    let k2z = mu_perp * k1z;
    let bound = classify(spec.is_lossless(), k0, kp, k1z, k2z);
    Ok(DispersionPoint {
        omega,
        kp,
        k1z,
        k2z,
        mu_perp,
        mu_par,
        bound,
        flag: PointFlag::Ok,
    })
}

fn is_bound(spec: &SuperlatticeSpec, omega: f64) -> bool {
    wavenumbers(spec, omega).map(|p| p.bound).unwrap_or(false)
}

/// Bisect a bound / unbound transition; returns the bound-side endpoint.
fn refine_edge(spec: &SuperlatticeSpec, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if is_bound(spec, mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Frequency interval on which a bound surface mode exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSegment {
    pub omega_lo: f64,
    pub omega_hi: f64,
}

impl BoundSegment {
    pub fn width(&self) -> f64 {
        self.omega_hi - self.omega_lo
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.omega_lo && omega <= self.omega_hi
    }

    /// Lower edge of the band next to the asymptote where `kp → ∞`.
    pub fn guard_start(&self) -> f64 {
        self.at(1.0 - ASYMPTOTE_GUARD_BAND)
    }

    /// Point at fraction `t` of the way from the lower to the upper edge.
    pub fn at(&self, t: f64) -> f64 {
        self.omega_lo + t * self.width()
    }
}

/// Locate the bound segment inside the perpendicular gap.
///
/// The gap is scanned on a fine grid and the longest contiguous bound run
/// is refined at both ends by bisection. `None` when no point is bound.
pub fn bound_segment(spec: &SuperlatticeSpec) -> Option<BoundSegment> {
    let perp = spec.perp();
    let (lo, hi) = (perp.omega_l, perp.omega_o);
    if !(hi > lo) {
        return None;
    }
    let n = SEGMENT_SCAN_POINTS;
    let grid: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    let flags: Vec<bool> = grid.par_iter().map(|&w| is_bound(spec, w)).collect();

    let best = runs(&flags).into_iter().max_by_key(|r| r.len())?;
    let first = best.start;
    let last = best.end - 1;
    let omega_lo = if first == 0 {
        grid[0]
    } else {
        refine_edge(spec, grid[first], grid[first - 1])
    };
    let omega_hi = if last == n {
        grid[n]
    } else {
        refine_edge(spec, grid[last], grid[last + 1])
    };
    Some(BoundSegment { omega_lo, omega_hi })
}

fn runs(flags: &[bool]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &b) in flags.iter().enumerate() {
        match (b, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..flags.len());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionCurve {
    pub points: Vec<DispersionPoint>,
    pub omega_lo: f64,
    pub omega_hi: f64,
}

impl DispersionCurve {
    /// Build a curve from precomputed points, which must be strictly increasing in ω.
    pub fn from_points(points: Vec<DispersionPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::validation(
                "points",
                "a curve needs at least two points",
            ));
        }
        if points.windows(2).any(|w| !(w[1].omega > w[0].omega)) {
            return Err(Error::validation(
                "points",
                "frequencies must be strictly increasing",
            ));
        }
        let omega_lo = points[0].omega;
        let omega_hi = points[points.len() - 1].omega;
        Ok(DispersionCurve {
            points,
            omega_lo,
            omega_hi,
        })
    }

    /// Index ranges of contiguous bound points.
    pub fn bound_runs(&self) -> Vec<Range<usize>> {
        let flags: Vec<bool> = self.points.iter().map(|p| p.bound).collect();
        runs(&flags)
    }

    pub fn bound_points(&self) -> impl Iterator<Item = &DispersionPoint> {
        self.points.iter().filter(|p| p.bound)
    }

    pub fn to_table(&self) -> Table {
        let mut table = Table::new(&CSV_COLUMNS);
        for p in &self.points {
            table.push_row(p.csv_row());
        }
        table
    }
}

/// Uniform scan of `n_points` frequencies from `omega_lo` to `omega_hi` inclusive.
///
/// Points at a permeability pole or on the degenerate branch are kept with a
/// flag and NaN wavenumbers.
pub fn trace_curve(
    spec: &SuperlatticeSpec,
    omega_lo: f64,
    omega_hi: f64,
    n_points: usize,
) -> Result<DispersionCurve> {
    if !(omega_lo > 0.0) {
        return Err(Error::domain("omega_lo must be positive"));
    }
    if !(omega_lo < omega_hi) {
        return Err(Error::validation("omega_hi", "must exceed omega_lo"));
    }
    if n_points < 2 {
        return Err(Error::validation(
            "n_points",
            "at least two points are required",
        ));
    }
    let step = (omega_hi - omega_lo) / (n_points - 1) as f64;
    let points = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let omega = if i == n_points - 1 {
                omega_hi
            } else {
                omega_lo + step * i as f64
            };
            match wavenumbers(spec, omega) {
                Ok(p) => Ok(p),
                Err(Error::Pole { .. }) => Ok(DispersionPoint::flagged(omega, PointFlag::Pole)),
                Err(Error::BranchDegenerate { .. }) => {
                    Ok(DispersionPoint::flagged(omega, PointFlag::Degenerate))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DispersionCurve {
        points,
        omega_lo,
        omega_hi,
    })
}

/// Frequency on the bound segment whose in-plane wavenumber is `kp_target`.
pub fn solve_omega_at_kp(spec: &SuperlatticeSpec, kp_target: f64) -> Result<f64> {
    let seg = bound_segment(spec)
        .ok_or_else(|| Error::OutOfRange("no bound segment for this superlattice".into()))?;
    let kp_at = |w: f64| wavenumbers(spec, w).map(|p| p.kp.re);
    let (mut lo, mut hi) = (seg.omega_lo, seg.omega_hi);
    let (kp_lo, kp_hi) = (kp_at(lo)?, kp_at(hi)?);
    if !(kp_target >= kp_lo && kp_target <= kp_hi) {
        return Err(Error::OutOfRange(format!(
            "kp = {kp_target:e} 1/m outside the attainable range [{kp_lo:e}, {kp_hi:e}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let kp = kp_at(mid)?;
        if kp < kp_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (elo, ehi) = (
        (kp_at(lo)? - kp_target).abs(),
        (kp_at(hi)? - kp_target).abs(),
    );
    Ok(if elo <= ehi { lo } else { hi })
}

/// `dω/dkp` at `omega`, from the quadratic through the nearest bound node and its neighbours.
pub fn group_velocity(curve: &DispersionCurve, omega: f64) -> Result<f64> {
    let pts = &curve.points;
    let out_of_range = || {
        Error::OutOfRange(format!(
            "omega = {omega:e} rad/s is not interior to a bound run of the curve"
        ))
    };
    if !(omega >= curve.omega_lo && omega <= curve.omega_hi) {
        return Err(out_of_range());
    }
    let upper = pts.partition_point(|p| p.omega < omega).min(pts.len() - 1);
    let c = if upper > 0 && (omega - pts[upper - 1].omega) < (pts[upper].omega - omega) {
        upper - 1
    } else {
        upper
    };
    if c == 0 || c + 1 >= pts.len() {
        return Err(out_of_range());
    }
    let nodes = [&pts[c - 1], &pts[c], &pts[c + 1]];
    if nodes.iter().any(|p| !p.bound) {
        return Err(out_of_range());
    }
    let x = [nodes[0].omega, nodes[1].omega, nodes[2].omega];
    let y = [nodes[0].kp.re, nodes[1].kp.re, nodes[2].kp.re];
    let mut dk = 0.0;
    for j in 0..3 {
        let (a, b) = ((j + 1) % 3, (j + 2) % 3);
        dk += y[j] * ((omega - x[a]) + (omega - x[b])) / ((x[j] - x[a]) * (x[j] - x[b]));
    }
    Ok(1.0 / dk)
}

/// Damping-limited propagation length `v_g / κ`.
pub fn propagation_length(v_g: f64, kappa_sphp: f64) -> Result<f64> {
    if !(v_g > 0.0) {
        return Err(Error::domain("group velocity must be positive"));
    }
    if !(kappa_sphp > 0.0) {
        return Err(Error::domain("damping rate must be positive"));
    }
    Ok(v_g / kappa_sphp)
}

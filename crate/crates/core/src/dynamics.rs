//! Coupled magnon / surface-polariton dynamics.
//!
//! Frequencies and rates are in rad/s and `ħ = 1` throughout. The master
//! equation is written in the frame rotating at the mode frequency, so only
//! the spin detuning `δ = ω_spin − ω_mode` enters the Hamiltonian
//! `H = δ S†S + G (S†a + a†S)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::spin_coupling::{mode_overlap, CoupledSystem, SpinEnsembleSpec};
use crate::table::Table;
use crate::{Error, Result};

/// Largest population tolerated in the top excitation shell.
pub const TRUNCATION_LIMIT: f64 = 1e-6;
/// Eigenvalues of ρ below `−POSITIVITY_TOL` raise a step-size warning.
pub const POSITIVITY_TOL: f64 = 1e-7;
/// Largest `|D|` for which two storage channels are treated as independent.
pub const OVERLAP_LIMIT: f64 = 0.1;
/// Allowed relative mismatch between `|Δk|` and `2π/l` in two-mode storage.
pub const MODE_SPACING_TOL: f64 = 0.1;
pub const DEFAULT_N_MAX: usize = 2;

pub const TRAJECTORY_COLUMNS: [&str; 6] = [
    "t_s",
    "pop_magnon",
    "pop_polariton",
    "pop_vacuum",
    "trace",
    "purity",
];
pub const CROSSING_COLUMNS: [&str; 5] = [
    "detuning_rad_s",
    "omega_plus",
    "omega_minus",
    "lw_plus",
    "lw_minus",
];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenPair {
    pub e_plus: Complex64,
    pub e_minus: Complex64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// `−2 Im E`.
    pub linewidth_plus: f64,
    pub linewidth_minus: f64,
}

impl EigenPair {
    fn from_roots(a: Complex64, b: Complex64) -> Self {
        let (hi, lo) = if b.re > a.re { (b, a) } else { (a, b) };
        EigenPair {
            e_plus: hi,
            e_minus: lo,
            omega_plus: hi.re,
            omega_minus: lo.re,
            linewidth_plus: -2.0 * hi.im,
            linewidth_minus: -2.0 * lo.im,
        }
    }

    pub fn splitting(&self) -> f64 {
        self.omega_plus - self.omega_minus
    }
}

/// Eigenvalues of `[[ω_spin − iγ_s, G], [G, ω_mode − iκ]]`, sorted by real part.
pub fn eigenfrequencies(sys: &CoupledSystem) -> EigenPair {
    let a = Complex64::new(sys.omega_spin, -sys.gamma_s);
    let d = Complex64::new(sys.omega_mode, -sys.kappa_sphp);
    let mean = (a + d) / 2.0;
    let half_diff = (a - d) / 2.0;
    let root = (half_diff * half_diff + sys.g * sys.g).sqrt();
    EigenPair::from_roots(mean + root, mean - root)
}

/// The closed form with the summed rate `γ_s + κ` inside the radicand.
///
/// Kept for comparison with [`eigenfrequencies`]; it does not diagonalize the
/// damped two-mode matrix unless `γ_s = κ = 0`.
pub fn summed_rate_formula(sys: &CoupledSystem) -> EigenPair {
    let rates = sys.gamma_s + sys.kappa_sphp;
    let mean = Complex64::new(sys.omega_spin + sys.omega_mode, -rates) / 2.0;
    let inner = Complex64::new(sys.omega_spin - sys.omega_mode, -rates);
    let root = (inner * inner / 4.0 + sys.g * sys.g).sqrt();
    EigenPair::from_roots(mean + root, mean - root)
}

/// Resonant splitting `2 Re √(G² − (γ_s − κ)²/4)`.
pub fn resonance_splitting(g: f64, gamma_s: f64, kappa: f64) -> f64 {
    let arg = g * g - (gamma_s - kappa).powi(2) / 4.0;
    2.0 * arg.max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingRow {
    pub detuning: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub lw_plus: f64,
    pub lw_minus: f64,
}

/// Sweep the spin frequency `ω_mode + δ` over a uniform detuning grid.
pub fn avoided_crossing(
    template: &CoupledSystem,
    detuning_lo: f64,
    detuning_hi: f64,
    n_points: usize,
) -> Result<Vec<CrossingRow>> {
    template.validate()?;
    if n_points < 3 {
        return Err(Error::validation(
            "n_points",
            "at least three points are required",
        ));
    }
    if !(detuning_lo < detuning_hi) {
        return Err(Error::validation("detuning_hi", "must exceed detuning_lo"));
    }
    let last = (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| {
            // Integer weights keep a symmetric range exactly mirror-symmetric.
            let detuning = (detuning_lo * (last - i as f64) + detuning_hi * i as f64) / last;
            let sys = CoupledSystem {
                omega_spin: template.omega_mode + detuning,
                ..*template
            };
            let e = eigenfrequencies(&sys);
            CrossingRow {
                detuning,
                omega_plus: e.omega_plus,
                omega_minus: e.omega_minus,
                lw_plus: e.linewidth_plus,
                lw_minus: e.linewidth_minus,
            }
        })
        .collect())
}

pub fn crossing_table(rows: &[CrossingRow]) -> Table {
    let mut table = Table::new(&CROSSING_COLUMNS);
    for r in rows {
        table.push_row(vec![
            r.detuning.into(),
            r.omega_plus.into(),
            r.omega_minus.into(),
            r.lw_plus.into(),
            r.lw_minus.into(),
        ]);
    }
    table
}

/// Two-mode Fock states `|n_m, n_p⟩` with `n_m + n_p ≤ n_max`.
///
/// Ordered by total excitation, then by descending magnon number:
/// `|00⟩, |10⟩, |01⟩, |20⟩, |11⟩, |02⟩, …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    pub n_max: usize,
    pub states: Vec<(usize, usize)>,
}

impl FockBasis {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::validation("n_max", "truncation must be at least 1"));
        }
        let states = (0..=n_max)
            .flat_map(|shell| (0..=shell).rev().map(move |m| (m, shell - m)))
            .collect();
        Ok(FockBasis { n_max, states })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index(&self, n_m: usize, n_p: usize) -> Option<usize> {
        self.states.iter().position(|&s| s == (n_m, n_p))
    }

    fn lowering(&self, magnon: bool) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut op = DMatrix::from_element(dim, dim, ZERO);
        for (col, &(m, p)) in self.states.iter().enumerate() {
            let (n, target) = if magnon {
                (m, (m.wrapping_sub(1), p))
            } else {
                (p, (m, p.wrapping_sub(1)))
            };
            if n == 0 {
                continue;
            }
            let row = self
                .index(target.0, target.1)
                .expect("lowered state is in the basis");
            op[(row, col)] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        op
    }

    /// Collective spin-wave (magnon) annihilation operator `S`.
    pub fn magnon_lowering(&self) -> DMatrix<Complex64> {
        self.lowering(true)
    }

    /// Surface-mode annihilation operator `a`.
    pub fn polariton_lowering(&self) -> DMatrix<Complex64> {
        self.lowering(false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    pub basis: FockBasis,
    pub rho: DMatrix<Complex64>,
}

impl TwoModeState {
    /// Pure Fock state `|n_m, n_p⟩`.
    pub fn fock(n_max: usize, n_m: usize, n_p: usize) -> Result<Self> {
        let basis = FockBasis::new(n_max)?;
        let idx = basis.index(n_m, n_p).ok_or_else(|| {
            Error::validation("state", format!("|{n_m},{n_p}> exceeds truncation {n_max}"))
        })?;
        let dim = basis.dim();
        let mut rho = DMatrix::from_element(dim, dim, ZERO);
        rho[(idx, idx)] = Complex64::new(1.0, 0.0);
        Ok(TwoModeState { basis, rho })
    }

    /// Single polariton, no magnon: the input of the storage protocol.
    pub fn single_polariton(n_max: usize) -> Result<Self> {
        Self::fock(n_max, 0, 1)
    }

    pub fn from_density(basis: FockBasis, rho: DMatrix<Complex64>) -> Result<Self> {
        if rho.nrows() != basis.dim() || rho.ncols() != basis.dim() {
            return Err(Error::validation(
                "rho",
                "dimension does not match the basis",
            ));
        }
        let state = TwoModeState { basis, rho };
        if state.hermiticity_error() > 1e-12 {
            return Err(Error::validation("rho", "density matrix is not Hermitian"));
        }
        if (state.trace() - 1.0).abs() > 1e-9 {
            return Err(Error::validation(
                "rho",
                "density matrix trace differs from 1",
            ));
        }
        if state.min_eigenvalue() < -1e-9 {
            return Err(Error::validation("rho", "density matrix is not positive"));
        }
        Ok(state)
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub fn population(&self, n_m: usize, n_p: usize) -> f64 {
        self.basis
            .index(n_m, n_p)
            .map(|i| self.rho[(i, i)].re)
            .unwrap_or(0.0)
    }

    /// `⟨S†S⟩`.
    pub fn magnon_number(&self) -> f64 {
        self.weighted_population(|m, _| m)
    }

    /// `⟨a†a⟩`.
    pub fn polariton_number(&self) -> f64 {
        self.weighted_population(|_, p| p)
    }

    fn weighted_population(&self, weight: impl Fn(usize, usize) -> usize) -> f64 {
        self.basis
            .states
            .iter()
            .enumerate()
            .map(|(i, &(m, p))| weight(m, p) as f64 * self.rho[(i, i)].re)
            .sum()
    }

    /// Total population of the states with `n_m + n_p = n_max`.
    pub fn top_shell_population(&self) -> f64 {
        let n_max = self.basis.n_max;
        self.basis
            .states
            .iter()
            .enumerate()
            .filter(|(_, &(m, p))| m + p == n_max)
            .map(|(i, _)| self.rho[(i, i)].re)
            .sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.basis.dim();
        let data = self.rho.as_slice();
        let mut worst: f64 = 0.0;
        for j in 0..dim {
            for i in 0..=j {
                worst = worst.max((data[i + j * dim] - data[j + i * dim].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().min()
    }
}

/// How the spin ensemble loses coherence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum SpinLoss {
    /// `γ_s D[S†S]`: pure dephasing through the magnon number.
    #[default]
    NumberDephasing,
    /// `γ_s D[S]`: magnon decay.
    Lowering,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveOptions {
    pub t_final: f64,
    /// Step size; [`default_dt`] when `None`.
    pub dt: Option<f64>,
    pub spin_loss: SpinLoss,
    /// Record every this many steps (the final time is always recorded).
    pub record_every: usize,
}

impl EvolveOptions {
    pub fn new(t_final: f64) -> Self {
        EvolveOptions {
            t_final,
            dt: None,
            spin_loss: SpinLoss::default(),
            record_every: 1,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_spin_loss(mut self, loss: SpinLoss) -> Self {
        self.spin_loss = loss;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }
}

/// `min(0.01/G, 0.01/κ, 0.01/γ_s, 0.01/|δ|)` over the nonzero rates.
pub fn default_dt(sys: &CoupledSystem) -> Option<f64> {
    [sys.g, sys.kappa_sphp, sys.gamma_s, sys.detuning().abs()]
        .into_iter()
        .filter(|&r| r > 0.0)
        .map(|r| 0.01 / r)
        .reduce(f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pop_magnon: f64,
    pub pop_polariton: f64,
    pub pop_vacuum: f64,
    pub trace: f64,
    pub purity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Density matrices at the sample times.
    pub states: Vec<TwoModeState>,
    pub dt: f64,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn final_state(&self) -> &TwoModeState {
        self.states
            .last()
            .expect("a trajectory holds at least the initial state")
    }

    pub fn to_table(&self) -> Table {
        let mut table = Table::new(&TRAJECTORY_COLUMNS);
        for s in &self.samples {
            table.push_row(vec![
                s.t.into(),
                s.pop_magnon.into(),
                s.pop_polariton.into(),
                s.pop_vacuum.into(),
                s.trace.into(),
                s.purity.into(),
            ]);
        }
        table
    }
}

/// The master-equation generator as a sparse superoperator on column-stacked ρ.
struct Liouvillian {
    entries: Vec<(usize, usize, Complex64)>,
    len: usize,
}

impl Liouvillian {
    fn new(basis: &FockBasis, sys: &CoupledSystem, loss: SpinLoss) -> Self {
        let s = basis.magnon_lowering();
        let a = basis.polariton_lowering();
        let s_dag = s.adjoint();
        let a_dag = a.adjoint();
        let number = &s_dag * &s;
        let g = Complex64::new(sys.g, 0.0);
        let hamiltonian =
            &number * Complex64::new(sys.detuning(), 0.0) + (&s_dag * &a + &a_dag * &s) * g;
        let spin_op = match loss {
            SpinLoss::NumberDephasing => number,
            SpinLoss::Lowering => s,
        };
        let dim = basis.dim();
        let identity = DMatrix::identity(dim, dim);
        let mut terms = vec![(-I, &hamiltonian, &identity), (I, &identity, &hamiltonian)];
        let jumps: Vec<_> = [(sys.gamma_s, spin_op), (sys.kappa_sphp, a)]
            .into_iter()
            .filter(|(rate, _)| *rate > 0.0)
            .map(|(rate, op)| {
                let dag = op.adjoint();
                let n = &dag * &op;
                (rate, op, dag, n)
            })
            .collect();
        for (rate, op, dag, n) in &jumps {
            let rate = Complex64::new(*rate, 0.0);
            terms.push((rate, op, dag));
            terms.push((-rate / 2.0, n, &identity));
            terms.push((-rate / 2.0, &identity, n));
        }

        // Column stacking: vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ).
        let nonzeros = |m: &DMatrix<Complex64>| {
            let mut out = Vec::new();
            for c in 0..dim {
                for r in 0..dim {
                    if m[(r, c)] != ZERO {
                        out.push((r, c, m[(r, c)]));
                    }
                }
            }
            out
        };
        let mut entries = Vec::new();
        for (coef, left, right) in terms {
            let (l_nz, r_nz) = (nonzeros(left), nonzeros(right));
            for &(i, k, av) in &l_nz {
                for &(l, j, bv) in &r_nz {
                    entries.push((i + dim * j, k + dim * l, coef * av * bv));
                }
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        entries.dedup_by(|next, kept| {
            if (next.0, next.1) == (kept.0, kept.1) {
                kept.2 += next.2;
                true
            } else {
                false
            }
        });
        entries.retain(|e| e.2 != ZERO);
        Liouvillian {
            entries,
            len: dim * dim,
        }
    }

    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.fill(ZERO);
        for &(r, c, v) in &self.entries {
            out[r] += v * x[c];
        }
    }

    fn rk4_step(&self, rho: &mut [Complex64], dt: f64, work: &mut Rk4Work) {
        let Rk4Work { k, tmp, acc } = work;
        acc.copy_from_slice(rho);
        for (stage, (weight, shift)) in [(1.0, 0.5), (2.0, 0.5), (2.0, 1.0), (1.0, 0.0)]
            .into_iter()
            .enumerate()
        {
            if stage == 0 {
                self.apply(rho, k);
            } else {
                self.apply(tmp, k);
            }
            for i in 0..self.len {
                acc[i] += k[i] * (weight * dt / 6.0);
                tmp[i] = rho[i] + k[i] * (shift * dt);
            }
        }
        rho.copy_from_slice(acc);
    }
}

struct Rk4Work {
    k: Vec<Complex64>,
    tmp: Vec<Complex64>,
    acc: Vec<Complex64>,
}

impl Rk4Work {
    fn new(len: usize) -> Self {
        Rk4Work {
            k: vec![ZERO; len],
            tmp: vec![ZERO; len],
            acc: vec![ZERO; len],
        }
    }
}

fn sample(t: f64, state: &TwoModeState) -> TrajectorySample {
    TrajectorySample {
        t,
        pop_magnon: state.magnon_number(),
        pop_polariton: state.polariton_number(),
        pop_vacuum: state.population(0, 0),
        trace: state.trace(),
        purity: state.purity(),
    }
}

/// Integrate the master equation with fixed-step RK4.
///
/// The step is shrunk slightly so that an integer number of steps lands on
/// `t_final` exactly.
pub fn lindblad_evolve(
    state: &TwoModeState,
    sys: &CoupledSystem,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    sys.validate()?;
    if !(opts.t_final.is_finite() && opts.t_final >= 0.0) {
        return Err(Error::validation("t_final", "must be finite and >= 0"));
    }
    let requested = match opts.dt {
        Some(dt) => dt,
        None => default_dt(sys).unwrap_or(opts.t_final.max(f64::MIN_POSITIVE)),
    };
    if !(requested.is_finite() && requested > 0.0) {
        return Err(Error::validation("dt", "must be finite and > 0"));
    }
    if opts.record_every == 0 {
        return Err(Error::validation("record_every", "must be >= 1"));
    }
    let steps = (opts.t_final / requested).ceil().max(1.0) as usize;
    let dt = opts.t_final / steps as f64;
    let liouvillian = Liouvillian::new(&state.basis, sys, opts.spin_loss);
    let mut work = Rk4Work::new(liouvillian.len);

    let mut current = state.clone();
    let mut traj = Trajectory {
        samples: vec![sample(0.0, &current)],
        states: vec![current.clone()],
        dt,
        max_trace_error: (current.trace() - 1.0).abs(),
        max_hermiticity_error: current.hermiticity_error(),
        min_eigenvalue: current.min_eigenvalue(),
        warnings: Vec::new(),
    };
    if opts.t_final == 0.0 {
        return Ok(traj);
    }
    let mut rho: Vec<Complex64> = current.rho.as_slice().to_vec();
    for step in 1..=steps {
        liouvillian.rk4_step(&mut rho, dt, &mut work);
        current.rho.copy_from_slice(&rho);
        let top = current.top_shell_population();
        if top > TRUNCATION_LIMIT {
            return Err(Error::Truncation { population: top });
        }
        traj.max_trace_error = traj.max_trace_error.max((current.trace() - 1.0).abs());
        traj.max_hermiticity_error = traj.max_hermiticity_error.max(current.hermiticity_error());
        if step % opts.record_every == 0 || step == steps {
            let t = if step == steps {
                opts.t_final
            } else {
                dt * step as f64
            };
            let min_eig = current.min_eigenvalue();
            if min_eig < -POSITIVITY_TOL && traj.min_eigenvalue >= -POSITIVITY_TOL {
                traj.warnings.push(format!(
                    "density matrix eigenvalue {min_eig:e} at t = {t:e} s; reduce dt"
                ));
            }
            traj.min_eigenvalue = traj.min_eigenvalue.min(min_eig);
            traj.samples.push(sample(t, &current));
            traj.states.push(current.clone());
        }
    }
    Ok(traj)
}

/// Magnon population after a `π/(2G)` swap starting from one polariton.
pub fn swap_fidelity(sys: &CoupledSystem, spin_loss: SpinLoss) -> Result<f64> {
    if !(sys.g > 0.0) {
        return Err(Error::domain("swap needs a positive coupling"));
    }
    let t_swap = std::f64::consts::PI / (2.0 * sys.g);
    let opts = EvolveOptions::new(t_swap)
        .with_spin_loss(spin_loss)
        .with_record_every(usize::MAX);
    let traj = lindblad_evolve(&TwoModeState::single_polariton(DEFAULT_N_MAX)?, sys, &opts)?;
    Ok(traj.final_state().population(1, 0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StorageResult {
    pub fidelity_a: f64,
    pub fidelity_b: f64,
    /// `|D|²` between the two spin-wave modes.
    pub crosstalk: f64,
    pub overlap: Complex64,
}

/// Store two surface modes in two spin-wave modes of the same ensemble.
///
/// The channels are evolved independently, which holds as long as their
/// spin-wave overlap over `positions` stays below [`OVERLAP_LIMIT`].
pub fn two_mode_storage(
    ens: &SpinEnsembleSpec,
    kp_a: f64,
    kp_b: f64,
    channel_a: &CoupledSystem,
    channel_b: &CoupledSystem,
    positions: &[f64],
    spin_loss: SpinLoss,
) -> Result<StorageResult> {
    ens.validate()?;
    let spacing = 2.0 * std::f64::consts::PI / ens.l;
    let dk = (kp_a - kp_b).abs();
    if (dk - spacing).abs() > MODE_SPACING_TOL * spacing {
        return Err(Error::domain(format!(
            "|kp_a - kp_b| = {dk:e} 1/m is not within 10% of 2π/l = {spacing:e} 1/m"
        )));
    }
    let overlap = mode_overlap(positions, kp_a, kp_b)?;
    if overlap.norm() > OVERLAP_LIMIT {
        return Err(Error::Overlap {
            magnitude: overlap.norm(),
            limit: OVERLAP_LIMIT,
        });
    }
    let (fa, fb) = rayon::join(
        || swap_fidelity(channel_a, spin_loss),
        || swap_fidelity(channel_b, spin_loss),
    );
    Ok(StorageResult {
        fidelity_a: fa?,
        fidelity_b: fb?,
        crosstalk: overlap.norm_sqr(),
        overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const SWAP_FIDELITY_TENTH: f64 = 0.907_236_143_578_117_101_34;

    fn fig4b(g: f64) -> CoupledSystem {
        CoupledSystem {
            omega_spin: 2.0 * PI * 2.45e9,
            omega_mode: 2.0 * PI * 2.45e9,
            g,
            gamma_s: 0.2 * g,
            kappa_sphp: 0.3 * g,
        }
    }

    fn rates(g: f64, gamma_s: f64, kappa: f64) -> CoupledSystem {
        CoupledSystem {
            omega_spin: 0.0,
            omega_mode: 0.0,
            g,
            gamma_s,
            kappa_sphp: kappa,
        }
    }

    /// Superoperator on span{|00⟩, |10⟩, |01⟩}, column-stacked, exponentiated.
    fn oracle(sys: &CoupledSystem, t: f64) -> DMatrix<Complex64> {
        let c = |x: f64| Complex64::new(x, 0.0);
        let mut s = DMatrix::from_element(3, 3, c(0.0));
        s[(0, 1)] = c(1.0);
        let mut a = DMatrix::from_element(3, 3, c(0.0));
        a[(0, 2)] = c(1.0);
        let mut h = DMatrix::from_element(3, 3, c(0.0));
        h[(1, 1)] = c(sys.omega_spin - sys.omega_mode);
        h[(1, 2)] = c(sys.g);
        h[(2, 1)] = c(sys.g);
        let n = s.adjoint() * &s;
        let ops = [(sys.gamma_s, n), (sys.kappa_sphp, a)];
        let mut sup = DMatrix::from_element(9, 9, c(0.0));
        for col in 0..9 {
            let mut e = DMatrix::from_element(3, 3, c(0.0));
            e[(col % 3, col / 3)] = c(1.0);
            let mut out = (&h * &e - &e * &h) * Complex64::new(0.0, -1.0);
            for (rate, o) in &ops {
                let od = o.adjoint();
                out +=
                    (o * &e * &od - (&od * o * &e) * c(0.5) - (&e * &od * o) * c(0.5)) * c(*rate);
            }
            for r in 0..9 {
                sup[(r, col)] = out[(r % 3, r / 3)];
            }
        }
        let mut rho0 = DMatrix::from_element(9, 1, c(0.0));
        rho0[(2 + 3 * 2, 0)] = c(1.0);
        let v = (sup * c(t)).exp() * rho0;
        DMatrix::from_fn(3, 3, |i, j| v[(i + 3 * j, 0)])
    }

    fn block(state: &TwoModeState) -> DMatrix<Complex64> {
        state.rho.view((0, 0), (3, 3)).into_owned()
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn basis_order() {
        let b = FockBasis::new(2).unwrap();
        assert_eq!(
            b.states,
            vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        );
        assert!(FockBasis::new(0).is_err());
        let s = b.magnon_lowering();
        assert_eq!(
            s[(b.index(1, 1).unwrap(), b.index(2, 1).unwrap_or(0))].re,
            0.0
        );
        assert_relative_eq!(s[(1, 3)].re, 2f64.sqrt());
        let a = b.polariton_lowering();
        assert_relative_eq!(a[(2, 5)].re, 2f64.sqrt());
        assert_eq!(a[(1, 4)].re, 1.0);
    }

    #[test]
    fn uncoupled_eigenvalues_are_bare() {
        let sys = CoupledSystem {
            omega_spin: 3.0,
            omega_mode: 2.0,
            g: 0.0,
            gamma_s: 0.1,
            kappa_sphp: 0.4,
        };
        let e = eigenfrequencies(&sys);
        assert!((e.e_plus - Complex64::new(3.0, -0.1)).norm() < 1e-15);
        assert!((e.e_minus - Complex64::new(2.0, -0.4)).norm() < 1e-15);
        assert_relative_eq!(e.linewidth_plus, 0.2);
    }

    #[test]
    fn resonant_splitting_with_fig4b_rates() {
        let g = 2.0 * PI * 9e6;
        let e = eigenfrequencies(&fig4b(g));
        let expected = 2.0 * (g * g - (0.2 * g - 0.3 * g).powi(2) / 4.0).sqrt();
        assert_relative_eq!(e.splitting(), expected, max_relative = 1e-10);
        assert_relative_eq!(
            e.splitting() / g,
            2.0 * (1.0 - 0.0025f64).sqrt(),
            max_relative = 1e-10
        );
        assert_relative_eq!(
            resonance_splitting(g, 0.2 * g, 0.3 * g),
            expected,
            max_relative = 1e-15
        );

        let equal = CoupledSystem {
            kappa_sphp: 0.2 * g,
            ..fig4b(g)
        };
        assert_relative_eq!(
            eigenfrequencies(&equal).splitting(),
            2.0 * g,
            max_relative = 1e-12
        );
    }

    #[test]
    fn summed_rate_formula_differs_from_matrix() {
        let g = 2.0 * PI * 9e6;
        let lossless = CoupledSystem {
            gamma_s: 0.0,
            kappa_sphp: 0.0,
            ..fig4b(g)
        };
        let a = eigenfrequencies(&lossless);
        let b = summed_rate_formula(&lossless);
        assert_relative_eq!(a.omega_plus, b.omega_plus, max_relative = 1e-15);
        // With damping it predicts a 2√(G² − (γ+κ)²/4) splitting, which the matrix does not have.
        let a = eigenfrequencies(&fig4b(g));
        let b = summed_rate_formula(&fig4b(g));
        assert_relative_eq!(
            b.splitting(),
            2.0 * g * (1.0 - 0.0625f64).sqrt(),
            max_relative = 1e-9
        );
        assert!((a.splitting() - b.splitting()).abs() > 1e-2 * g);
    }

    #[test]
    fn dispersive_limit() {
        let g = 1.0;
        let detuning = 100.0 * g;
        let sys = CoupledSystem {
            omega_spin: 1e4 + detuning,
            omega_mode: 1e4,
            g,
            gamma_s: 0.2,
            kappa_sphp: 0.3,
        };
        let e = eigenfrequencies(&sys);
        let bound = g * g / detuning * 1.1;
        assert!((e.omega_plus - sys.omega_spin).abs() < bound);
        assert!((e.omega_minus - sys.omega_mode).abs() < bound);
    }

    #[test]
    fn crossing_minimum_at_resonance() {
        let g = 2.0 * PI * 9e6;
        let rows = avoided_crossing(&fig4b(g), -10.0 * g, 10.0 * g, 401).unwrap();
        let gaps: Vec<f64> = rows.iter().map(|r| r.omega_plus - r.omega_minus).collect();
        let (imin, min) = gaps
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(rows[imin].detuning, 0.0);
        assert_relative_eq!(
            *min,
            resonance_splitting(g, 0.2 * g, 0.3 * g),
            max_relative = 1e-10
        );
        assert_relative_eq!(*min, 2.0 * PI * 17.9775e6, max_relative = 1e-4);

        let n = rows.len();
        let centre = fig4b(g).omega_mode;
        for i in 0..n {
            let (r, m) = (&rows[i], &rows[n - 1 - i]);
            assert_eq!(r.detuning, -m.detuning);
            let shift = r.detuning / 2.0;
            assert_relative_eq!(
                r.omega_plus - centre - shift,
                m.omega_plus - centre + shift,
                epsilon = 1e-6 * g
            );
            assert_relative_eq!(r.lw_plus, m.lw_minus, epsilon = 1e-6 * g);
        }
        assert_eq!(crossing_table(&rows).rows.len(), 401);
        assert!(avoided_crossing(&fig4b(g), -1.0, 1.0, 2).is_err());
    }

    #[test]
    fn uncoupled_branches_cross() {
        let sys = CoupledSystem {
            g: 0.0,
            ..fig4b(1e7)
        };
        let rows = avoided_crossing(&sys, -1e8, 1e8, 101).unwrap();
        let mid = &rows[50];
        assert_eq!(mid.detuning, 0.0);
        assert_eq!(mid.omega_plus - mid.omega_minus, 0.0);
    }

    #[test]
    fn lossless_rabi_swap() {
        let g = 2.0 * PI * 9e6;
        let sys = rates(g, 0.0, 0.0);
        let t_swap = PI / (2.0 * g);
        let traj = lindblad_evolve(
            &TwoModeState::single_polariton(2).unwrap(),
            &sys,
            &EvolveOptions::new(t_swap).with_record_every(10),
        )
        .unwrap();
        for s in &traj.samples {
            assert!((s.pop_polariton - (g * s.t).cos().powi(2)).abs() < 1e-8);
            assert!((s.pop_magnon - (g * s.t).sin().powi(2)).abs() < 1e-8);
        }
        assert_eq!(traj.samples.last().unwrap().t, t_swap);
        assert!((traj.final_state().population(1, 0) - 1.0).abs() < 1e-8);
        assert!(swap_fidelity(&sys, SpinLoss::NumberDephasing).unwrap() >= 1.0 - 1e-6);
    }

    #[test]
    fn pure_polariton_decay() {
        let kappa = 3e6;
        let traj = lindblad_evolve(
            &TwoModeState::single_polariton(2).unwrap(),
            &rates(0.0, 0.0, kappa),
            &EvolveOptions::new(3.0 / kappa),
        )
        .unwrap();
        for s in &traj.samples {
            assert!((s.pop_polariton - (-kappa * s.t).exp()).abs() < 1e-8);
            assert!((s.pop_vacuum - (1.0 - (-kappa * s.t).exp())).abs() < 1e-8);
        }
    }

    #[test]
    fn trajectory_matches_superoperator_exponential() {
        let g = 2.0 * PI * 9e6;
        let sys = fig4b(g);
        let traj = lindblad_evolve(
            &TwoModeState::single_polariton(2).unwrap(),
            &sys,
            &EvolveOptions::new(3.0 / g).with_record_every(5),
        )
        .unwrap();
        for (s, state) in traj.samples.iter().zip(&traj.states) {
            let exact = oracle(&sys, s.t);
            assert!(max_diff(&block(state), &exact) < 1e-6);
        }
        assert!(traj.max_trace_error < 1e-9);
        assert!(traj.max_hermiticity_error < 1e-12);
        assert!(traj.warnings.is_empty());
    }

    #[test]
    fn detuned_trajectory_matches_oracle() {
        let g = 1e6;
        let sys = CoupledSystem {
            omega_spin: 1e9 + 0.7 * g,
            omega_mode: 1e9,
            ..rates(g, 0.1 * g, 0.4 * g)
        };
        let traj = lindblad_evolve(
            &TwoModeState::single_polariton(2).unwrap(),
            &sys,
            &EvolveOptions::new(4.0 / g),
        )
        .unwrap();
        assert!(max_diff(&block(traj.final_state()), &oracle(&sys, 4.0 / g)) < 1e-6);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let g = 1.0;
        let sys = rates(g, 0.2, 0.3);
        let t = 3.0;
        let exact = oracle(&sys, t);
        let err = |dt: f64| {
            let traj = lindblad_evolve(
                &TwoModeState::single_polariton(2).unwrap(),
                &sys,
                &EvolveOptions::new(t)
                    .with_dt(dt)
                    .with_record_every(usize::MAX),
            )
            .unwrap();
            max_diff(&block(traj.final_state()), &exact)
        };
        let (e1, e2, e3) = (err(0.2), err(0.1), err(0.05));
        assert!(e1 / e2 >= 8.0, "{e1} {e2}");
        assert!(e2 / e3 >= 8.0, "{e2} {e3}");
    }

    #[test]
    fn truncation_is_detected() {
        let sys = rates(1.0, 0.0, 0.0);
        let err = lindblad_evolve(
            &TwoModeState::single_polariton(1).unwrap(),
            &sys,
            &EvolveOptions::new(1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
        assert!(TwoModeState::fock(1, 1, 1).is_err());
    }

    #[test]
    fn coarse_steps_raise_positivity_warning() {
        let sys = rates(1.0, 0.0, 1.0);
        let traj = lindblad_evolve(
            &TwoModeState::single_polariton(2).unwrap(),
            &sys,
            &EvolveOptions::new(20.0).with_dt(0.5),
        )
        .unwrap();
        assert!(traj.min_eigenvalue < -POSITIVITY_TOL);
        assert_eq!(traj.warnings.len(), 1);
    }

    #[test]
    fn spin_loss_options() {
        let gamma = 2.0;
        let magnon = TwoModeState::fock(2, 1, 0).unwrap();
        let opts = EvolveOptions::new(1.0);
        let dephased = lindblad_evolve(&magnon, &rates(0.0, gamma, 0.0), &opts).unwrap();
        assert!((dephased.final_state().population(1, 0) - 1.0).abs() < 1e-12);
        let decayed = lindblad_evolve(
            &magnon,
            &rates(0.0, gamma, 0.0),
            &opts.with_spin_loss(SpinLoss::Lowering),
        )
        .unwrap();
        assert!((decayed.final_state().population(1, 0) - (-gamma).exp()).abs() < 1e-8);
    }

    #[test]
    fn damped_swap_fidelity() {
        let g = 2.0 * PI * 9e6;
        let sys = rates(g, 0.1 * g, 0.1 * g);
        let f = swap_fidelity(&sys, SpinLoss::NumberDephasing).unwrap();
        assert_relative_eq!(f, SWAP_FIDELITY_TENTH, max_relative = 1e-8);
        let t = PI / (2.0 * g);
        assert!(f > (-(0.2 * g) * t).exp() && f < 1.0);
        assert!(swap_fidelity(&rates(0.0, 1.0, 1.0), SpinLoss::NumberDephasing).is_err());

        let mut last = 1.0;
        for i in 0..10 {
            let f = swap_fidelity(
                &rates(g, 0.1 * g, 0.05 * g * i as f64),
                SpinLoss::NumberDephasing,
            )
            .unwrap();
            assert!(f <= last);
            last = f;
        }
    }

    #[test]
    fn two_mode_storage_with_orthogonal_spin_waves() {
        let g = 2.0 * PI * 9e6;
        let ens = SpinEnsembleSpec::new(2e24, 1e-3, 20e-3, 0.2 * g).unwrap();
        let dk = 2.0 * PI / ens.l;
        assert_relative_eq!(dk, 314.159_265_358_979, max_relative = 1e-12);
        let kp_a = 1047.0;
        let (ch_a, ch_b) = (
            fig4b(g),
            CoupledSystem {
                g: 0.9 * g,
                ..fig4b(g)
            },
        );

        let spaced = crate::spin_coupling::equally_spaced_positions(100_000, ens.l);
        let r = two_mode_storage(
            &ens,
            kp_a,
            kp_a + dk,
            &ch_a,
            &ch_b,
            &spaced,
            SpinLoss::default(),
        )
        .unwrap();
        assert!(r.crosstalk < 1e-12);
        assert_eq!(
            r.fidelity_a,
            swap_fidelity(&ch_a, SpinLoss::default()).unwrap()
        );
        assert_eq!(
            r.fidelity_b,
            swap_fidelity(&ch_b, SpinLoss::default()).unwrap()
        );

        let random = crate::spin_coupling::sample_positions(100_000, ens.l, 11);
        let r = two_mode_storage(
            &ens,
            kp_a,
            kp_a + dk,
            &ch_a,
            &ch_a,
            &random,
            SpinLoss::default(),
        )
        .unwrap();
        assert!(r.crosstalk < 1e-4);
        assert_eq!(r.fidelity_a, r.fidelity_b);

        let off = two_mode_storage(
            &ens,
            kp_a,
            kp_a + 1.2 * dk,
            &ch_a,
            &ch_b,
            &spaced,
            SpinLoss::default(),
        );
        assert!(matches!(off, Err(Error::Domain(_))));
        let clumped = vec![0.0; 100];
        let overlap = two_mode_storage(
            &ens,
            kp_a,
            kp_a + dk,
            &ch_a,
            &ch_b,
            &clumped,
            SpinLoss::default(),
        );
        assert!(matches!(overlap, Err(Error::Overlap { .. })));
    }

    #[test]
    fn trajectory_table_layout() {
        let traj = lindblad_evolve(
            &TwoModeState::single_polariton(2).unwrap(),
            &rates(1.0, 0.1, 0.1),
            &EvolveOptions::new(1.0).with_record_every(10),
        )
        .unwrap();
        let table = traj.to_table();
        assert_eq!(table.columns, TRAJECTORY_COLUMNS);
        assert_eq!(table.rows.len(), traj.samples.len());
        assert_eq!(traj.samples.len(), 11);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn eigenvalue_sum_rule_and_closed_form(
            ws in 1e9f64..2e10, wm in 1e9f64..2e10,
            g in 0.0f64..1e8, gs in 0.0f64..1e8, k in 0.0f64..1e8,
        ) {
            let sys = CoupledSystem { omega_spin: ws, omega_mode: wm, g, gamma_s: gs, kappa_sphp: k };
            let e = eigenfrequencies(&sys);
            let trace = Complex64::new(ws + wm, -(gs + k));
            prop_assert!(((e.e_plus + e.e_minus) - trace).norm() <= 1e-12 * trace.norm());
            prop_assert!(e.omega_plus >= e.omega_minus);

            let mean = trace / 2.0;
            let diff = Complex64::new(ws - wm, -(gs - k));
            let r = (g * g + diff * diff / 4.0).sqrt();
            let (p, m) = (mean + r, mean - r);
            let scale = trace.norm();
            let direct = (e.e_plus - p).norm().max((e.e_minus - m).norm());
            let swapped = (e.e_plus - m).norm().max((e.e_minus - p).norm());
            prop_assert!(direct.min(swapped) <= 1e-10 * scale);
        }
    }
}

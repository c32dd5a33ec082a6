//! One function per subcommand; each returns the table it emits.

use std::f64::consts::PI;

use rayon::prelude::*;
use sphp_core::constants::to_ghz;
use sphp_core::dispersion::{
    bound_segment, solve_omega_at_kp, trace_curve, wavenumbers, BoundSegment,
};
use sphp_core::dynamics::{
    avoided_crossing, crossing_table, lindblad_evolve, resonance_splitting, two_mode_storage,
    EvolveOptions, TwoModeState, DEFAULT_N_MAX,
};
use sphp_core::materials::{permeability, SuperlatticeSpec};
use sphp_core::quantization::{mode_table, quantize, ModeQuantization};
use sphp_core::spin_coupling::{
    dephasing_estimate, equally_spaced_positions, g_collective, g_single, sample_positions,
    sweep_cooperativity_vs_period, sweep_table, CoupledSystem, NvParams, SpinEnsembleSpec,
};
use sphp_core::table::{format_float, Cell, Table};
use sphp_core::Error;

use crate::config::{Placement, Resolved};
use crate::CliError;

pub const PERMEABILITY_COLUMNS: [&str; 7] = [
    "omega_rad_s",
    "freq_GHz",
    "mu_perp_re",
    "mu_perp_im",
    "mu_par_re",
    "mu_par_im",
    "pole",
];
pub const SINGLE_COUPLING_COLUMNS: [&str; 4] = ["omega_rad_s", "freq_GHz", "z_m", "g_single"];
pub const COLLECTIVE_COUPLING_COLUMNS: [&str; 4] = ["omega_rad_s", "freq_GHz", "h_m", "G_rad_s"];

/// Reference value for the midgap surface wavelength [m], reported for comparison.
pub const LAMBDA_P_REFERENCE: f64 = 6e-3;

const GHZ: f64 = 2.0 * PI * 1e9;
const DEFAULT_GAMMA_S: f64 = 2.0 * PI * 3e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum CouplingKind {
    /// g(ω, z) of one spin at height z.
    Single,
    /// G(ω, h) of a slab of thickness h.
    #[default]
    Collective,
}

fn spec(r: &Resolved) -> Result<SuperlatticeSpec, CliError> {
    let lossless = SuperlatticeSpec::new(r.material.clone(), r.config.superlattice.d, 0.0)?;
    let kappa = r.config.superlattice.damping_fraction * lossless.perp().omega_l;
    Ok(SuperlatticeSpec::new(
        r.material.clone(),
        r.config.superlattice.d,
        kappa,
    )?)
}

fn segment(spec: &SuperlatticeSpec) -> Result<BoundSegment, CliError> {
    bound_segment(&spec.lossless())
        .ok_or_else(|| Error::OutOfRange("no bound segment for this superlattice".into()).into())
}

/// `points` frequencies from `lo` to `hi` inclusive.
fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points)
        .map(|i| (lo * (last - i as f64) + hi * i as f64) / last)
        .collect()
}

/// Configured window, defaulting to a margin around both resonance pairs.
fn window(r: &Resolved, spec: &SuperlatticeSpec) -> (f64, f64) {
    let res = spec.resonances();
    let lo = res.omega_perp_l.min(res.omega_par_l) * 0.99;
    let hi = res.omega_perp_o.max(res.omega_par_o) * 1.01;
    (
        r.config.scan.freq_lo_ghz.map_or(lo, |f| f * GHZ),
        r.config.scan.freq_hi_ghz.map_or(hi, |f| f * GHZ),
    )
}

fn ensemble(r: &Resolved) -> Result<SpinEnsembleSpec, CliError> {
    let e = &r.config.ensemble;
    let gamma_s = match (e.gamma_s, e.impurity_density) {
        (Some(g), _) => g,
        (None, Some(n_n)) => dephasing_estimate(n_n)?,
        (None, None) => DEFAULT_GAMMA_S,
    };
    Ok(SpinEnsembleSpec::new(e.n, e.h, e.l, gamma_s)?.with_fraction(e.resonant_fraction)?)
}

/// Mode frequency for the coupled-system commands.
fn mode_frequency(r: &Resolved, spec: &SuperlatticeSpec) -> f64 {
    r.config
        .coupled
        .freq_ghz
        .map_or_else(|| spec.resonances().perp_midgap(), |f| f * GHZ)
}

fn coupled_system(r: &Resolved, omega: f64) -> CoupledSystem {
    let c = &r.config.coupled;
    CoupledSystem {
        omega_spin: omega,
        omega_mode: omega,
        g: c.g,
        gamma_s: c.gamma_s,
        kappa_sphp: c.kappa,
    }
}

pub fn cmd_permeability(r: &Resolved) -> Result<Table, CliError> {
    let spec = spec(r)?;
    let (lo, hi) = window(r, &spec);
    if !(lo > 0.0) {
        return Err(Error::Domain("scan.freq_lo_ghz must be positive".into()).into());
    }
    let rows = grid(lo, hi, r.config.scan.points)
        .into_par_iter()
        .map(|w| match permeability(&spec, w) {
            Ok(p) => Ok(vec![
                w.into(),
                to_ghz(w).into(),
                p.mu_perp.re.into(),
                p.mu_perp.im.into(),
                p.mu_par.re.into(),
                p.mu_par.im.into(),
                false.into(),
            ]),
            Err(Error::Pole { .. }) => {
                let mut row: Vec<Cell> = vec![w.into(), to_ghz(w).into()];
                row.extend(std::iter::repeat_n(Cell::Float(f64::NAN), 4));
                row.push(true.into());
                Ok(row)
            }
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&PERMEABILITY_COLUMNS);
    let res = spec.resonances();
    table.note("omega_perp_L_rad_s", format_float(res.omega_perp_l));
    table.note("omega_perp_o_rad_s", format_float(res.omega_perp_o));
    table.note("omega_par_L_rad_s", format_float(res.omega_par_l));
    table.note("omega_par_o_rad_s", format_float(res.omega_par_o));
    table.note("kappa_damp_rad_s", format_float(spec.kappa_damp));
    for row in rows {
        table.push_row(row);
    }
    Ok(table)
}

pub fn cmd_dispersion(r: &Resolved) -> Result<Table, CliError> {
    let spec = spec(r)?;
    let (lo, hi) = window(r, &spec);
    let curve = trace_curve(&spec, lo, hi, r.config.scan.points)?;
    let mut table = curve.to_table();
    let midgap = spec.resonances().perp_midgap();
    let point = wavenumbers(&spec, midgap)?;
    table.note("midgap_freq_GHz", format_float(to_ghz(midgap)));
    table.note("midgap_lambda_p_m", format_float(point.wavelength()));
    table.note(
        "lambda_p_reference_m",
        format!("{LAMBDA_P_REFERENCE:e} (reported value, approximate)"),
    );
    if let Some(seg) = bound_segment(&spec.lossless()) {
        table.note(
            "bound_segment_rad_s",
            format!(
                "{} {}",
                format_float(seg.omega_lo),
                format_float(seg.omega_hi)
            ),
        );
    }
    Ok(table)
}

/// Bound-segment frequencies at cell centres, clipped to the configured window.
fn segment_grid(r: &Resolved, seg: &BoundSegment, points: usize) -> Result<Vec<f64>, CliError> {
    let lo = r
        .config
        .scan
        .freq_lo_ghz
        .map_or(seg.omega_lo, |f| (f * GHZ).max(seg.omega_lo));
    let hi = r
        .config
        .scan
        .freq_hi_ghz
        .map_or(seg.omega_hi, |f| (f * GHZ).min(seg.omega_hi));
    if !(lo < hi) {
        return Err(
            Error::OutOfRange("scan window does not intersect the bound segment".into()).into(),
        );
    }
    Ok((0..points)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / points as f64)
        .collect())
}

fn modes(spec: &SuperlatticeSpec, omegas: &[f64]) -> Result<Vec<ModeQuantization>, CliError> {
    Ok(omegas
        .par_iter()
        .map(|&w| quantize(spec, w))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn cmd_mode(r: &Resolved) -> Result<Table, CliError> {
    let spec = spec(r)?;
    let seg = segment(&spec)?;
    let omegas = segment_grid(r, &seg, r.config.scan.points)?;
    let mut table = mode_table(&modes(&spec, &omegas)?);
    table.note("grid", "cell centres across the bound segment");
    Ok(table)
}

pub fn cmd_coupling(r: &Resolved, kind: CouplingKind) -> Result<Table, CliError> {
    let spec = spec(r)?;
    let seg = segment(&spec)?;
    let c = &r.config.coupling;
    let omegas = segment_grid(r, &seg, c.freq_points)?;
    let modes = modes(&spec, &omegas)?;
    let nv = NvParams::default();
    let ens = ensemble(r)?;
    let mut table = match kind {
        CouplingKind::Single => Table::new(&SINGLE_COUPLING_COLUMNS),
        CouplingKind::Collective => Table::new(&COLLECTIVE_COUPLING_COLUMNS),
    };
    for mode in &modes {
        match kind {
            CouplingKind::Single => {
                for z in grid(0.0, c.z_max, c.z_points) {
                    let g = g_single(mode, &nv, z)?;
                    table.push_row(vec![
                        mode.omega.into(),
                        to_ghz(mode.omega).into(),
                        z.into(),
                        g.into(),
                    ]);
                }
            }
            CouplingKind::Collective => {
                for h in grid(0.0, c.h_max, c.h_points).into_iter().skip(1) {
                    let slab = SpinEnsembleSpec { h, ..ens };
                    let g = g_collective(mode, &nv, &slab)?;
                    table.push_row(vec![
                        mode.omega.into(),
                        to_ghz(mode.omega).into(),
                        h.into(),
                        g.into(),
                    ]);
                }
            }
        }
    }
    match kind {
        CouplingKind::Single => table.note("g_single_units", "rad/s * m"),
        CouplingKind::Collective => {
            table.note("n_per_m3", format_float(ens.n));
            table.note("resonant_fraction", format_float(ens.resonant_fraction));
        }
    }
    Ok(table)
}

pub fn cmd_cooperativity(r: &Resolved) -> Result<Table, CliError> {
    let c = &r.config.cooperativity;
    let d_values: Vec<f64> = grid(c.period_lo, c.period_hi, c.points)
        .into_iter()
        .map(|period| period / 2.0)
        .collect();
    let rows = sweep_cooperativity_vs_period(
        &r.material,
        &d_values,
        &NvParams::default(),
        &ensemble(r)?,
        r.config.superlattice.kappa_rule.into(),
    )?;
    Ok(sweep_table(&rows))
}

pub fn cmd_crossing(r: &Resolved) -> Result<Table, CliError> {
    let spec = spec(r)?;
    let c = &r.config.coupled;
    let sys = coupled_system(r, mode_frequency(r, &spec));
    let span = c.detuning_span * c.g;
    let rows = avoided_crossing(&sys, -span, span, c.points)?;
    let mut table = crossing_table(&rows);
    let min_gap = rows
        .iter()
        .map(|row| row.omega_plus - row.omega_minus)
        .fold(f64::INFINITY, f64::min);
    table.note("omega_mode_rad_s", format_float(sys.omega_mode));
    table.note("min_gap_rad_s", format_float(min_gap));
    table.note(
        "resonant_splitting_rad_s",
        format_float(resonance_splitting(sys.g, sys.gamma_s, sys.kappa_sphp)),
    );
    Ok(table)
}

pub fn cmd_store(r: &Resolved) -> Result<Table, CliError> {
    let spec = spec(r)?.lossless();
    let ens = ensemble(r)?;
    let s = &r.config.store;
    let omega_a = mode_frequency(r, &spec);
    let point_a = wavenumbers(&spec, omega_a)?;
    if !point_a.bound {
        return Err(Error::Domain(format!(
            "mode frequency {} GHz is not on the bound segment",
            to_ghz(omega_a)
        ))
        .into());
    }
    let kp_a = point_a.kp.re;
    let kp_b = kp_a + 2.0 * PI / ens.l;
    let omega_b = solve_omega_at_kp(&spec, kp_b)?;
    let positions = match s.positions {
        Placement::Random => sample_positions(s.n_spins, ens.l, r.config.seed),
        Placement::Equal => equally_spaced_positions(s.n_spins, ens.l),
    };
    let channel_a = coupled_system(r, omega_a);
    let channel_b = coupled_system(r, omega_b);
    let loss = s.spin_loss.into();
    let storage = two_mode_storage(&ens, kp_a, kp_b, &channel_a, &channel_b, &positions, loss)?;

    let t_final = s.t_final.unwrap_or(PI / (2.0 * channel_a.g));
    let opts = EvolveOptions::new(t_final)
        .with_spin_loss(loss)
        .with_record_every(s.record_every);
    let traj = lindblad_evolve(
        &TwoModeState::single_polariton(DEFAULT_N_MAX)?,
        &channel_a,
        &opts,
    )?;

    let mut table = traj.to_table();
    table.note("fidelity_a", format_float(storage.fidelity_a));
    table.note("fidelity_b", format_float(storage.fidelity_b));
    table.note("crosstalk", format_float(storage.crosstalk));
    table.note("kp_a_per_m", format_float(kp_a));
    table.note("delta_k_per_m", format_float(kp_b - kp_a));
    table.note("n_spins", s.n_spins);
    table.note("dt_s", format_float(traj.dt));
    for w in &traj.warnings {
        table.note("warning", w);
    }
    Ok(table)
}

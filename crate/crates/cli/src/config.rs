//! Run configuration: TOML input, defaults, validation and the canonical digest.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sphp_core::dynamics::SpinLoss;
use sphp_core::materials::{load_material, MaterialParams};
use sphp_core::spin_coupling::KappaRule;

use crate::CliError;

const DEFAULT_G: f64 = 2.0 * PI * 9e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Preset name or path to a `key = value` material file.
    pub material: String,
    pub seed: u64,
    pub superlattice: SuperlatticeSection,
    pub scan: ScanSection,
    pub ensemble: EnsembleSection,
    pub coupling: CouplingSection,
    pub cooperativity: CooperativitySection,
    pub coupled: CoupledSection,
    pub store: StoreSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            material: "terfenol-d".into(),
            seed: 7,
            superlattice: SuperlatticeSection::default(),
            scan: ScanSection::default(),
            ensemble: EnsembleSection::default(),
            coupling: CouplingSection::default(),
            cooperativity: CooperativitySection::default(),
            coupled: CoupledSection::default(),
            store: StoreSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KappaRuleConfig {
    /// Linewidth as a fraction of `ω⊥L` at each period.
    Fraction(f64),
    /// Fixed linewidth [rad/s].
    Fixed(f64),
}

impl From<KappaRuleConfig> for KappaRule {
    fn from(rule: KappaRuleConfig) -> Self {
        match rule {
            KappaRuleConfig::Fraction(f) => KappaRule::FractionOfPerpL(f),
            KappaRuleConfig::Fixed(k) => KappaRule::Fixed(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuperlatticeSection {
    /// Domain half-period [m].
    pub d: f64,
    /// Material damping as a fraction of `ω⊥L` (0 is lossless).
    pub damping_fraction: f64,
    /// Surface-mode linewidth used by the cooperativity sweep.
    pub kappa_rule: KappaRuleConfig,
}

impl Default for SuperlatticeSection {
    fn default() -> Self {
        SuperlatticeSection {
            d: 0.5e-6,
            damping_fraction: 0.0,
            kappa_rule: KappaRuleConfig::Fraction(1e-3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// Frequency window [GHz]; defaults depend on the subcommand.
    pub freq_lo_ghz: Option<f64>,
    pub freq_hi_ghz: Option<f64>,
    pub points: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            freq_lo_ghz: None,
            freq_hi_ghz: None,
            points: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    /// NV density [1/m³].
    pub n: f64,
    /// Slab thickness [m].
    pub h: f64,
    /// Slab length [m].
    pub l: f64,
    /// Dephasing rate [rad/s]; exclusive with `impurity_density`.
    pub gamma_s: Option<f64>,
    /// Nitrogen density [1/m³] for the dipolar dephasing estimate.
    pub impurity_density: Option<f64>,
    pub resonant_fraction: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            n: 2e24,
            h: 1e-3,
            l: 20e-3,
            gamma_s: None,
            impurity_density: None,
            resonant_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    /// Frequencies sampled across the bound segment.
    pub freq_points: usize,
    pub z_max: f64,
    pub z_points: usize,
    pub h_max: f64,
    pub h_points: usize,
}

impl Default for CouplingSection {
    fn default() -> Self {
        CouplingSection {
            freq_points: 5,
            z_max: 2e-3,
            z_points: 101,
            h_max: 5e-3,
            h_points: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CooperativitySection {
    /// Superlattice period range `L = 2d` [m].
    pub period_lo: f64,
    pub period_hi: f64,
    pub points: usize,
}

impl Default for CooperativitySection {
    fn default() -> Self {
        CooperativitySection {
            period_lo: 1e-6,
            period_hi: 4e-6,
            points: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupledSection {
    /// Collective coupling [rad/s].
    pub g: f64,
    pub gamma_s: f64,
    pub kappa: f64,
    /// Mode frequency [GHz]; midgap of the negative-μ⊥ window when absent.
    pub freq_ghz: Option<f64>,
    /// Half-width of the detuning sweep in units of `g`.
    pub detuning_span: f64,
    pub points: usize,
}

impl Default for CoupledSection {
    fn default() -> Self {
        CoupledSection {
            g: DEFAULT_G,
            gamma_s: 0.2 * DEFAULT_G,
            kappa: 0.3 * DEFAULT_G,
            freq_ghz: None,
            detuning_span: 5.0,
            points: 1001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    #[default]
    Random,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinLossConfig {
    #[default]
    Dephasing,
    Lowering,
}

impl From<SpinLossConfig> for SpinLoss {
    fn from(loss: SpinLossConfig) -> Self {
        match loss {
            SpinLossConfig::Dephasing => SpinLoss::NumberDephasing,
            SpinLossConfig::Lowering => SpinLoss::Lowering,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreSection {
    pub n_spins: usize,
    pub positions: Placement,
    pub spin_loss: SpinLossConfig,
    /// Trajectory length [s]; the swap time `π/(2g)` when absent.
    pub t_final: Option<f64>,
    pub record_every: usize,
}

impl Default for StoreSection {
    fn default() -> Self {
        StoreSection {
            n_spins: 100_000,
            positions: Placement::Random,
            spin_loss: SpinLossConfig::Dephasing,
            t_final: None,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Overrides from the command line, applied after the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub material: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
}

/// A validated configuration with its material resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: RunConfig,
    pub material: MaterialParams,
}

#[derive(Serialize)]
struct Canonical<'a> {
    material: &'a MaterialParams,
    seed: u64,
    superlattice: &'a SuperlatticeSection,
    scan: &'a ScanSection,
    ensemble: &'a EnsembleSection,
    coupling: &'a CouplingSection,
    cooperativity: &'a CooperativitySection,
    coupled: &'a CoupledSection,
    store: &'a StoreSection,
}

impl Resolved {
    /// SHA-256 of the canonical JSON form (material by value, output excluded).
    pub fn digest(&self) -> String {
        let c = &self.config;
        let canonical = Canonical {
            material: &self.material,
            seed: c.seed,
            superlattice: &c.superlattice,
            scan: &c.scan,
            ensemble: &c.ensemble,
            coupling: &c.coupling,
            cooperativity: &c.cooperativity,
            coupled: &c.coupled,
            store: &c.store,
        };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    /// Read a config file; a relative material path is taken relative to it.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if MaterialParams::preset(&config.material).is_none() {
            let material = Path::new(&config.material);
            if material.is_relative() {
                if let Some(dir) = path.parent() {
                    config.material = dir.join(material).to_string_lossy().into_owned();
                }
            }
        }
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(m) = &overrides.material {
            self.material = m.clone();
        }
        if let Some(out) = &overrides.out {
            self.output.path = Some(out.clone());
        }
        if let Some(format) = overrides.format {
            self.output.format = format;
        }
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
    }

    pub fn resolve(self) -> Result<Resolved, CliError> {
        self.validate()?;
        let material = resolve_material(&self.material)?;
        Ok(Resolved {
            config: self,
            material,
        })
    }

    fn validate(&self) -> Result<(), CliError> {
        let grids = [
            ("scan.points", self.scan.points),
            ("coupling.freq_points", self.coupling.freq_points),
            ("coupling.z_points", self.coupling.z_points),
            ("coupling.h_points", self.coupling.h_points),
            ("cooperativity.points", self.cooperativity.points),
            ("coupled.points", self.coupled.points),
        ];
        for (field, n) in grids {
            if n < 2 {
                return Err(CliError::Config(format!("{field} must be >= 2, got {n}")));
            }
        }
        let ranges = [
            ("scan.freq", self.scan.freq_lo_ghz, self.scan.freq_hi_ghz),
            (
                "cooperativity.period",
                Some(self.cooperativity.period_lo),
                Some(self.cooperativity.period_hi),
            ),
        ];
        for (field, lo, hi) in ranges {
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if !(lo < hi) {
                    return Err(CliError::Config(format!(
                        "{field} range is empty: lo = {lo}, hi = {hi}"
                    )));
                }
            }
        }
        let lengths = [
            ("coupling.z_max", self.coupling.z_max),
            ("coupling.h_max", self.coupling.h_max),
            ("coupled.detuning_span", self.coupled.detuning_span),
        ];
        for (field, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("{field} must be > 0, got {v}")));
            }
        }
        if self.ensemble.gamma_s.is_some() && self.ensemble.impurity_density.is_some() {
            return Err(CliError::Config(
                "ensemble.gamma_s and ensemble.impurity_density are mutually exclusive".into(),
            ));
        }
        if self.store.n_spins == 0 {
            return Err(CliError::Config("store.n_spins must be >= 1".into()));
        }
        if self.store.record_every == 0 {
            return Err(CliError::Config("store.record_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// A preset name, or a path to a material file.
pub fn resolve_material(source: &str) -> Result<MaterialParams, CliError> {
    if let Some(preset) = MaterialParams::preset(source) {
        return Ok(preset);
    }
    let path = Path::new(source);
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "material file not found: {} (presets: {})",
            path.display(),
            MaterialParams::preset_names().join(", ")
        )));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read material {}: {e}", path.display())))?;
    load_material(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

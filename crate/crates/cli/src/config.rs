//! Versioned JSON run configurations.
//!
//! Every config carries `"version": 1` and unknown keys are rejected.
//! Relative input paths resolve against the directory holding the config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use nvpd::kinetics::TwoStateRates;
use nvpd::sim::{EmissionModel, Pulse, PulseRates, PulseSequence};
use nvpd::units::{ChargeState, Power, Wavelength};

use crate::error::{CliError, Result};
use crate::manifest::Manifest;

pub const SCHEMA_VERSION: u32 = 1;

/// Transition rates given either directly or as mean lifetimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RatesConfig {
    Lifetimes { minus_ms: f64, zero_ms: f64 },
    Rates { ionization_per_ms: f64, recombination_per_ms: f64 },
}

impl RatesConfig {
    pub fn to_rates(&self) -> Result<TwoStateRates<f64>> {
        let r = match *self {
            RatesConfig::Lifetimes { minus_ms, zero_ms } => TwoStateRates::from_lifetimes(minus_ms, zero_ms),
            RatesConfig::Rates { ionization_per_ms, recombination_per_ms } => {
                TwoStateRates::new(ionization_per_ms, recombination_per_ms)
            }
        };
        r.map_err(|e| CliError::config(format!("rates: {e}")))
    }
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionConfig {
    pub fl_minus_per_ms: f64,
    pub fl_zero_per_ms: f64,
    #[serde(default = "one")]
    pub bin_ms: f64,
}

impl EmissionConfig {
    pub fn to_model(&self) -> Result<EmissionModel> {
        EmissionModel::new(self.fl_minus_per_ms, self.fl_zero_per_ms, self.bin_ms)
            .map_err(|e| CliError::config(format!("emission: {e}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Drawn from the steady state of the rates.
    #[default]
    SteadyState,
    Minus,
    Zero,
}

impl InitialState {
    pub fn fixed(self) -> Option<ChargeState> {
        match self {
            InitialState::SteadyState => None,
            InitialState::Minus => Some(ChargeState::Negative),
            InitialState::Zero => Some(ChargeState::Neutral),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub version: u32,
    pub rates: RatesConfig,
    pub emission: EmissionConfig,
    pub duration_ms: f64,
    #[serde(default)]
    pub initial: InitialState,
    pub seed: u64,
    /// Number of independent traces; trace `i` uses `derive_seed(seed, i)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    #[serde(default = "yes")]
    pub include_true_path: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramConfig {
    pub version: u32,
    pub p_minus: f64,
    pub emission: EmissionConfig,
    pub readout_ms: f64,
    /// Charge dynamics during readout; frozen if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_rates: Option<RatesConfig>,
    pub shots: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub wavelength_nm: f64,
    pub power_uw: f64,
    pub duration_ms: f64,
}

impl PulseConfig {
    pub fn to_pulse(&self, name: &str) -> Result<Pulse> {
        let bad = |e: nvpd::Error| CliError::config(format!("{name} pulse: {e}"));
        Ok(Pulse {
            wavelength: Wavelength::new(self.wavelength_nm).map_err(bad)?,
            power: Power::new(self.power_uw).map_err(bad)?,
            duration: self.duration_ms,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub init: PulseConfig,
    pub probe: PulseConfig,
    pub detect: PulseConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseRatesConfig {
    pub init: RatesConfig,
    pub probe: RatesConfig,
    pub detect: RatesConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotsConfig {
    pub version: u32,
    pub sequence: SequenceConfig,
    pub rates: PulseRatesConfig,
    pub emission: EmissionConfig,
    pub shots: u64,
    pub seed: u64,
    #[serde(default = "yes")]
    pub include_truth: bool,
}

impl ShotsConfig {
    pub fn sequence(&self) -> Result<PulseSequence> {
        let seq = PulseSequence {
            init: self.sequence.init.to_pulse("init")?,
            probe: self.sequence.probe.to_pulse("probe")?,
            detect: self.sequence.detect.to_pulse("detect")?,
        };
        seq.validate().map_err(|e| CliError::config(e.to_string()))?;
        Ok(seq)
    }

    pub fn pulse_rates(&self) -> Result<PulseRates> {
        Ok(PulseRates {
            init: self.rates.init.to_rates()?,
            probe: self.rates.probe.to_rates()?,
            detect: self.rates.detect.to_rates()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHmmConfig {
    pub version: u32,
    pub input: PathBuf,
    /// Overrides the bin width inferred from the `bin_ms` column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default = "yes")]
    pub plot_data: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountSource {
    /// `count,shots` histogram file.
    #[default]
    Histogram,
    /// Pre-probe counts of a shot file.
    ShotsPre,
    /// Post-probe counts of a shot file.
    ShotsPost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramFitConfig {
    pub version: u32,
    pub input: PathBuf,
    #[serde(default)]
    pub source: CountSource,
    #[serde(default = "yes")]
    pub plot_data: bool,
}

/// One probe duration of a flip experiment given as raw shots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotFileEntry {
    pub duration_ms: f64,
    pub file: PathBuf,
}

/// How shot counts are classified into charge states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierConfig {
    /// Counts ≥ threshold read as NV⁻.
    Threshold(u64),
    /// Fit a Poisson mixture to this histogram and use its optimal threshold.
    Calibration(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FlipInput {
    /// CSV `duration_ms,initial,flips,trials`.
    Table(PathBuf),
    Shots { classifier: ClassifierConfig, files: Vec<ShotFileEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipFitConfig {
    pub version: u32,
    pub input: FlipInput,
    #[serde(default = "yes")]
    pub plot_data: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// r = a·p + b·p².
    #[default]
    General,
    /// r = b·p².
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatePowerFitConfig {
    pub version: u32,
    /// CSV `power_uw,rate[,sigma]`.
    pub input: PathBuf,
    #[serde(default)]
    pub model: RateModel,
    #[serde(default = "yes")]
    pub weighted: bool,
    #[serde(default = "yes")]
    pub plot_data: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationFitConfig {
    pub version: u32,
    /// CSV `power_uw,fluorescence`.
    pub input: PathBuf,
    #[serde(default = "yes")]
    pub plot_data: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergyBranch {
    /// Free σ, points above 445 nm only.
    #[default]
    Ionization,
    /// σ held fixed, all points.
    Recombination { sigma_ev: f64 },
    /// Free σ, all points.
    Unrestricted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyFitConfig {
    pub version: u32,
    /// CSV `wavelength_nm,rate[,sigma]`.
    pub input: PathBuf,
    #[serde(default)]
    pub branch: EnergyBranch,
    #[serde(default = "yes")]
    pub weighted: bool,
    #[serde(default = "yes")]
    pub plot_data: bool,
}

/// Options shared by the figure pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceConfig {
    pub version: u32,
    pub seed: u64,
    /// Multiplies every default shot count and trace length.
    #[serde(default = "one")]
    pub scale: f64,
}

impl Default for ReproduceConfig {
    fn default() -> Self {
        Self { version: SCHEMA_VERSION, seed: 0, scale: 1.0 }
    }
}

/// A parsed config plus the directory its relative paths refer to.
pub struct Loaded<T> {
    pub config: T,
    pub base_dir: PathBuf,
    pub bytes: Vec<u8>,
}

impl<T> Loaded<T> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

pub trait Versioned {
    fn version(&self) -> u32;
    fn check(&self) -> Result<()> {
        if self.version() != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "unsupported config version {} (expected {SCHEMA_VERSION})",
                self.version()
            )));
        }
        Ok(())
    }
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn version(&self) -> u32 {
                self.version
            }
        }
    )*};
}

versioned!(
    TraceConfig,
    HistogramConfig,
    ShotsConfig,
    TraceHmmConfig,
    HistogramFitConfig,
    FlipFitConfig,
    RatePowerFitConfig,
    SaturationFitConfig,
    EnergyFitConfig,
    ReproduceConfig
);

/// Parses `bytes` as `T`, or as a manifest whose embedded config is a `T`.
pub fn parse<T: DeserializeOwned + Versioned>(bytes: &[u8], origin: &Path) -> Result<T> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| CliError::input(origin, e))?;
    let value = if value.get("tool").is_some() && value.get("config").is_some() {
        let m: Manifest = serde_json::from_value(value).map_err(|e| CliError::input(origin, e))?;
        m.config
    } else {
        value
    };
    let cfg: T = serde_json::from_value(value).map_err(|e| CliError::input(origin, e))?;
    cfg.check()?;
    Ok(cfg)
}

pub fn load<T: DeserializeOwned + Versioned>(path: &Path) -> Result<Loaded<T>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let config = parse(&bytes, path)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base_dir, bytes })
}

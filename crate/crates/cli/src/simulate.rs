//! `nvpd simulate <kind>`: seeded synthetic data.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use nvpd::kinetics::TwoStateRates;
use nvpd::sim::export::{write_histogram_csv, write_shots_csv, write_trace_csv};
use nvpd::sim::rng::derive_seed;
use nvpd::sim::{detection_warnings, simulate_correlated_experiment, simulate_detection_histogram, simulate_trace, simulate_trace_from};

use crate::config::{parse, HistogramConfig, ShotsConfig, TraceConfig, Versioned};
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, OutputDir};
use crate::presets::{self, PresetKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Trace,
    Histogram,
    Shots,
}

impl SimKind {
    pub fn name(self) -> &'static str {
        match self {
            SimKind::Trace => "trace",
            SimKind::Histogram => "histogram",
            SimKind::Shots => "shots",
        }
    }

    fn preset_kind(self) -> PresetKind {
        match self {
            SimKind::Trace => PresetKind::Trace,
            SimKind::Histogram => PresetKind::Histogram,
            SimKind::Shots => PresetKind::Shots,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    Config(PathBuf),
    Preset(String),
}

fn load_source<T: DeserializeOwned + Versioned>(kind: SimKind, source: &Source) -> Result<(T, Option<(String, Vec<u8>)>)> {
    match source {
        Source::Config(path) => {
            let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
            let cfg = parse(&bytes, path)?;
            Ok((cfg, Some((path.display().to_string(), bytes))))
        }
        Source::Preset(name) => {
            let (pk, value) = presets::lookup(name)
                .ok_or_else(|| CliError::config(format!("unknown preset {name:?}; known: {}", presets::NAMES.join(", "))))?;
            if pk != kind.preset_kind() {
                return Err(CliError::config(format!("preset {name:?} is not a {} preset", kind.name())));
            }
            let cfg = serde_json::from_value(value).map_err(|e| CliError::config(e.to_string()))?;
            Ok((cfg, None))
        }
    }
}

fn start<T: Serialize>(kind: SimKind, cfg: &T, seed: u64, out_dir: &Path, input: Option<(String, Vec<u8>)>) -> Result<OutputDir> {
    let value = serde_json::to_value(cfg).expect("serialisable config");
    let mut out = OutputDir::create(out_dir, &format!("simulate {}", kind.name()), value, Some(seed))?;
    if let Some((name, bytes)) = input {
        out.record_input(&name, &bytes);
    }
    Ok(out)
}

/// Runs one simulation; `seed` overrides the configured root seed.
pub fn run(kind: SimKind, source: &Source, seed: Option<u64>, out_dir: &Path) -> Result<Manifest> {
    match kind {
        SimKind::Trace => {
            let (mut cfg, input) = load_source::<TraceConfig>(kind, source)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let mut out = start(kind, &cfg, cfg.seed, out_dir, input)?;
            trace(&cfg, &mut out)?;
            out.finish()
        }
        SimKind::Histogram => {
            let (mut cfg, input) = load_source::<HistogramConfig>(kind, source)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let mut out = start(kind, &cfg, cfg.seed, out_dir, input)?;
            histogram(&cfg, &mut out)?;
            out.finish()
        }
        SimKind::Shots => {
            let (mut cfg, input) = load_source::<ShotsConfig>(kind, source)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let mut out = start(kind, &cfg, cfg.seed, out_dir, input)?;
            shots(&cfg, &mut out)?;
            out.finish()
        }
    }
}

/// File name and seed of every trace of a config.
pub fn trace_jobs(cfg: &TraceConfig) -> Vec<(String, u64)> {
    match cfg.replicates {
        None => vec![("trace.csv".into(), cfg.seed)],
        Some(n) => (0..n).map(|i| (format!("trace_{i:03}.csv"), derive_seed(cfg.seed, i))).collect(),
    }
}

fn trace(cfg: &TraceConfig, out: &mut OutputDir) -> Result<()> {
    let rates = cfg.rates.to_rates()?;
    let em = cfg.emission.to_model()?;
    if !(cfg.duration_ms >= em.bin_width && cfg.duration_ms.is_finite()) {
        return Err(CliError::config(format!("duration_ms must be at least one bin ({} ms)", em.bin_width)));
    }
    if cfg.replicates == Some(0) {
        return Err(CliError::config("replicates must be >= 1"));
    }
    if em.fl_minus == em.fl_zero {
        out.warn("equal fluorescence levels: the charge state is not observable in this trace");
    }
    let jobs = trace_jobs(cfg);
    let files: Vec<nvpd::Result<Vec<u8>>> = jobs
        .par_iter()
        .map(|(_, seed)| {
            let mut trace = match cfg.initial.fixed() {
                Some(s) => simulate_trace_from(&rates, &em, cfg.duration_ms, s, *seed)?,
                None => simulate_trace(&rates, &em, cfg.duration_ms, *seed)?,
            };
            if !cfg.include_true_path {
                trace.true_path = None;
            }
            let mut buf = Vec::new();
            write_trace_csv(&trace, &mut buf).expect("in-memory write");
            Ok(buf)
        })
        .collect();
    for ((name, _), bytes) in jobs.iter().zip(files) {
        out.write(name, &bytes?)?;
    }
    Ok(())
}

fn histogram(cfg: &HistogramConfig, out: &mut OutputDir) -> Result<()> {
    let em = cfg.emission.to_model()?;
    let rates = match &cfg.readout_rates {
        Some(r) => r.to_rates()?,
        None => TwoStateRates::zero(),
    };
    let h = simulate_detection_histogram(cfg.p_minus, &em, &rates, cfg.readout_ms, cfg.shots, cfg.seed)?;
    let mut buf = Vec::new();
    write_histogram_csv(&h, &mut buf).expect("in-memory write");
    out.write("histogram.csv", &buf)?;
    Ok(())
}

fn shots(cfg: &ShotsConfig, out: &mut OutputDir) -> Result<()> {
    let seq = cfg.sequence()?;
    let rates = cfg.pulse_rates()?;
    let em = cfg.emission.to_model()?;
    for w in detection_warnings(&seq, &rates, &em) {
        out.warn(w);
    }
    let mut records = simulate_correlated_experiment(&seq, &rates, &em, cfg.shots, cfg.seed)?;
    if !cfg.include_truth {
        for r in &mut records {
            r.true_pre = None;
            r.true_post = None;
        }
    }
    let mut buf = Vec::new();
    write_shots_csv(&records, &mut buf).expect("in-memory write");
    out.write("shots.csv", &buf)?;
    Ok(())
}

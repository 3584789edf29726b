//! Built-in configurations.

use nvpd::units::Power;

use crate::config::{
    EmissionConfig, HistogramConfig, InitialState, PulseConfig, PulseRatesConfig, RatesConfig, SequenceConfig, ShotsConfig,
    TraceConfig, SCHEMA_VERSION,
};
use crate::synthetic;

pub const NAMES: [&str; 4] = ["fig1b", "zero-rate", "fig5b", "fig6b"];

/// Which `simulate` subcommand a preset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Trace,
    Histogram,
    Shots,
}

/// 60 s trace with lifetimes 56.6 / 465 ms and levels 2.2 / 0.3 counts/ms.
pub fn fig1b() -> TraceConfig {
    TraceConfig {
        version: SCHEMA_VERSION,
        rates: RatesConfig::Lifetimes { minus_ms: synthetic::T_MINUS_ANCHOR_MS, zero_ms: synthetic::T_ZERO_ANCHOR_MS },
        emission: EmissionConfig {
            fl_minus_per_ms: synthetic::FL_MINUS_ANCHOR,
            fl_zero_per_ms: synthetic::FL_ZERO_ANCHOR,
            bin_ms: 1.0,
        },
        duration_ms: 60_000.0,
        initial: InitialState::SteadyState,
        seed: 0,
        replicates: None,
        include_true_path: true,
    }
}

/// Frozen charge state: constant Poisson statistics.
pub fn zero_rate() -> TraceConfig {
    TraceConfig {
        rates: RatesConfig::Rates { ionization_per_ms: 0.0, recombination_per_ms: 0.0 },
        initial: InitialState::Minus,
        ..fig1b()
    }
}

/// Readout histogram with means 3 / 30 counts and 70 % NV⁻.
pub fn fig5b() -> HistogramConfig {
    HistogramConfig {
        version: SCHEMA_VERSION,
        p_minus: 0.7,
        emission: EmissionConfig { fl_minus_per_ms: 30.0, fl_zero_per_ms: 3.0, bin_ms: 1.0 },
        readout_ms: 1.0,
        readout_rates: None,
        shots: 100_000,
        seed: 0,
    }
}

fn rates_at(nm: f64, uw: f64) -> RatesConfig {
    let r = synthetic::rates(nm, Power::new(uw).expect("positive power"));
    RatesConfig::Rates { ionization_per_ms: r.ionization, recombination_per_ms: r.recombination }
}

/// Correlated shots: 532 nm init, 470 nm / 8.4 µW probe for one relaxation
/// time, weak 594 nm readout.
pub fn fig6b() -> ShotsConfig {
    let (init, probe) = ((532.0, 100.0), (470.0, 8.4));
    let probe_rates = synthetic::rates(probe.0, Power::new(probe.1).expect("positive power"));
    let em = synthetic::emission(synthetic::READOUT_NM, Power::new(synthetic::READOUT_UW).expect("positive power"), 1.0);
    ShotsConfig {
        version: SCHEMA_VERSION,
        sequence: SequenceConfig {
            init: PulseConfig { wavelength_nm: init.0, power_uw: init.1, duration_ms: 1.0 },
            probe: PulseConfig { wavelength_nm: probe.0, power_uw: probe.1, duration_ms: 1.0 / probe_rates.total() },
            detect: PulseConfig {
                wavelength_nm: synthetic::READOUT_NM,
                power_uw: synthetic::READOUT_UW,
                duration_ms: synthetic::READOUT_MS,
            },
        },
        rates: PulseRatesConfig {
            init: rates_at(init.0, init.1),
            probe: rates_at(probe.0, probe.1),
            detect: rates_at(synthetic::READOUT_NM, synthetic::READOUT_UW),
        },
        emission: EmissionConfig { fl_minus_per_ms: em.fl_minus, fl_zero_per_ms: em.fl_zero, bin_ms: 1.0 },
        shots: 10_000,
        seed: 0,
        include_truth: true,
    }
}

fn value<T: serde::Serialize>(c: T) -> serde_json::Value {
    serde_json::to_value(c).expect("serialisable preset")
}

pub fn lookup(name: &str) -> Option<(PresetKind, serde_json::Value)> {
    match name {
        "fig1b" => Some((PresetKind::Trace, value(fig1b()))),
        "zero-rate" => Some((PresetKind::Trace, value(zero_rate()))),
        "fig5b" => Some((PresetKind::Histogram, value(fig5b()))),
        "fig6b" => Some((PresetKind::Shots, value(fig6b()))),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;
    use std::path::Path;

    #[test]
    fn presets_parse_back() {
        for name in NAMES {
            let (kind, v) = lookup(name).unwrap();
            let bytes = serde_json::to_vec(&v).unwrap();
            let ok = match kind {
                PresetKind::Trace => parse::<TraceConfig>(&bytes, Path::new(name)).is_ok(),
                PresetKind::Histogram => parse::<HistogramConfig>(&bytes, Path::new(name)).is_ok(),
                PresetKind::Shots => parse::<ShotsConfig>(&bytes, Path::new(name)).is_ok(),
            };
            assert!(ok, "{name}");
        }
        assert!(lookup("fig2").is_none());
    }

    #[test]
    fn fig6b_readout_is_single_shot() {
        let c = fig6b();
        let seq = c.sequence().unwrap();
        let warnings = nvpd::sim::detection_warnings(&seq, &c.pulse_rates().unwrap(), &c.emission.to_model().unwrap());
        assert!(warnings.is_empty(), "{warnings:?}");
    }
}

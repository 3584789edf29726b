use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detection::readout;
use super::rng::stream_rng;
use super::trace::simulate_jump_path;
use super::EmissionModel;
use crate::error::{Error, Result};
use crate::kinetics::TwoStateRates;
use crate::units::{ChargeState, Power, Wavelength};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub wavelength: Wavelength<f64>,
    pub power: Power<f64>,
    pub duration: f64,
}

/// Init pulse (prepares the charge state), detection pulses before and
/// after, and the probe pulse whose effect is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub init: Pulse,
    pub probe: Pulse,
    pub detect: Pulse,
}

impl PulseSequence {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("init", &self.init), ("probe", &self.probe), ("detect", &self.detect)] {
            if !(p.duration >= 0.0 && p.duration.is_finite()) {
                return Err(Error::domain(format!("{name} pulse duration must be >= 0")));
            }
        }
        if !(self.detect.duration > 0.0) {
            return Err(Error::domain("detection pulse duration must be > 0"));
        }
        Ok(())
    }
}

/// Charge-transition rates in effect during each pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRates {
    pub init: TwoStateRates<f64>,
    pub probe: TwoStateRates<f64>,
    pub detect: TwoStateRates<f64>,
}

/// Counts of the two detection windows of one shot. `true_pre` is the state
/// when the probe pulse starts, `true_post` the state when it ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub pre_counts: u64,
    pub post_counts: u64,
    pub true_pre: Option<ChargeState>,
    pub true_post: Option<ChargeState>,
}

/// Conditions under which single-shot readout is unreliable or the init
/// pulse cannot reach a steady state.
pub fn detection_warnings(seq: &PulseSequence, rates: &PulseRates, em: &EmissionModel) -> Vec<String> {
    let mut out = Vec::new();
    let t = seq.detect.duration;
    let separation = (em.fl_minus - em.fl_zero) * t;
    let mean = 0.5 * (em.fl_minus + em.fl_zero) * t;
    if separation <= 5.0 * mean.sqrt() {
        out.push(format!(
            "detection pulse too short: count separation {separation:.2} <= 5·sqrt({mean:.2})"
        ));
    }
    let relax = rates.init.total();
    if seq.init.duration > 0.0 && seq.init.duration * relax < 5.0 {
        out.push(format!(
            "init pulse of {} ms is shorter than 5 relaxation times (1/λ_tot = {:.3} ms); \
             population has not reached its steady state",
            seq.init.duration,
            relax.recip()
        ));
    }
    out
}

/// Simulates `shots` independent pre-readout / probe / post-readout cycles.
///
/// Each shot starts in NV⁻, is prepared by the init pulse, then read out,
/// probed, and read out again. Fluorescence is counted only during the
/// detection pulses. Shot `i` draws from stream `i` of `seed`.
pub fn simulate_correlated_experiment(
    seq: &PulseSequence,
    rates: &PulseRates,
    em: &EmissionModel,
    shots: u64,
    seed: u64,
) -> Result<Vec<ShotRecord>> {
    seq.validate()?;
    em.validate()?;
    if shots == 0 {
        return Err(Error::domain("need at least one shot"));
    }
    for w in detection_warnings(seq, rates, em) {
        warn!("{w}");
    }
    let records = (0..shots)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            simulate_shot(seq, rates, em, &mut rng)
        })
        .collect();
    Ok(records)
}

fn simulate_shot<R: Rng + ?Sized>(seq: &PulseSequence, rates: &PulseRates, em: &EmissionModel, rng: &mut R) -> ShotRecord {
    let mut state = ChargeState::Negative;
    if seq.init.duration > 0.0 {
        state = simulate_jump_path(&rates.init, state, seq.init.duration, rng).final_state();
    }
    let (pre_counts, after_pre) = readout(state, &rates.detect, em, seq.detect.duration, rng);
    let mut after_probe = after_pre;
    if seq.probe.duration > 0.0 {
        after_probe = simulate_jump_path(&rates.probe, after_pre, seq.probe.duration, rng).final_state();
    }
    let (post_counts, _) = readout(after_probe, &rates.detect, em, seq.detect.duration, rng);
    ShotRecord {
        pre_counts,
        post_counts,
        true_pre: Some(after_pre),
        true_post: Some(after_probe),
    }
}

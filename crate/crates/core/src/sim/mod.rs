//! Seeded forward simulation of photon-counting experiments on a two-state
//! emitter: continuous-illumination telegraph traces, single-shot readout
//! histograms, and correlated before/probe/after pulse sequences.

pub mod correlated;
pub mod detection;
pub mod export;
pub mod rng;
pub mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::ChargeState;

pub use correlated::{
    detection_warnings, simulate_correlated_experiment, Pulse, PulseRates, PulseSequence, ShotRecord,
};
pub use detection::{simulate_detection_histogram, CountHistogram};
pub use trace::{simulate_jump_path, simulate_trace, simulate_trace_from, Dwell, JumpPath, PhotonTrace};

/// Fluorescence levels (counts/ms) of the two charge states and the
/// counting bin width (ms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionModel {
    pub fl_minus: f64,
    pub fl_zero: f64,
    pub bin_width: f64,
}

impl EmissionModel {
    pub fn new(fl_minus: f64, fl_zero: f64, bin_width: f64) -> Result<Self> {
        let em = Self { fl_minus, fl_zero, bin_width };
        em.validate()?;
        Ok(em)
    }

    /// Equal levels are accepted so that indistinguishable emission can be
    /// simulated.
    pub fn validate(&self) -> Result<()> {
        if !(self.fl_zero >= 0.0 && self.fl_minus >= self.fl_zero && self.fl_minus > 0.0 && self.fl_minus.is_finite()) {
            return Err(Error::domain(format!(
                "need fl_minus >= fl_zero >= 0 and fl_minus > 0, got ({}, {})",
                self.fl_minus, self.fl_zero
            )));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::domain(format!("bin width must be > 0 ms, got {}", self.bin_width)));
        }
        Ok(())
    }

    /// Fluorescence level of `state` in counts/ms.
    pub fn level(&self, state: ChargeState) -> f64 {
        match state {
            ChargeState::Negative => self.fl_minus,
            ChargeState::Neutral => self.fl_zero,
        }
    }
}

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::stream_rng;
use super::trace::{poisson_count, simulate_jump_path};
use super::EmissionModel;
use crate::error::{Error, Result};
use crate::kinetics::TwoStateRates;
use crate::units::ChargeState;

/// Photon-count histogram: `counts[k]` is the number of shots with `k` photons.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountHistogram {
    pub counts: Vec<u64>,
}

impl CountHistogram {
    pub fn from_samples<I: IntoIterator<Item = u64>>(samples: I) -> Self {
        let mut counts = Vec::new();
        for k in samples {
            let k = k as usize;
            if k >= counts.len() {
                counts.resize(k + 1, 0);
            }
            counts[k] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        let n = self.total() as f64;
        self.counts.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum::<f64>() / n
    }

    /// Every bin multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        Self { counts: self.counts.iter().map(|c| c * factor).collect() }
    }
}

/// Photon count of one readout window of length `readout` started in
/// `state`, with the state evolving under `rates`. Returns the count and
/// the state at the end of the window.
pub(crate) fn readout<R: Rng + ?Sized>(
    state: ChargeState,
    rates: &TwoStateRates<f64>,
    em: &EmissionModel,
    readout: f64,
    rng: &mut R,
) -> (u64, ChargeState) {
    let path = simulate_jump_path(rates, state, readout, rng);
    let t_minus = path.time_negative(0.0, readout);
    let mean = em.fl_minus * t_minus + em.fl_zero * (readout - t_minus);
    (poisson_count(mean, rng), path.final_state())
}

/// Histogram of single-shot readout counts for a population prepared with
/// NV⁻ probability `p_minus`. Shot `i` uses stream `i` of `seed`.
pub fn simulate_detection_histogram(
    p_minus: f64,
    em: &EmissionModel,
    rates_during_readout: &TwoStateRates<f64>,
    readout_ms: f64,
    shots: u64,
    seed: u64,
) -> Result<CountHistogram> {
    em.validate()?;
    if !(0.0..=1.0).contains(&p_minus) {
        return Err(Error::domain(format!("p_minus must lie in [0, 1], got {p_minus}")));
    }
    if shots == 0 {
        return Err(Error::domain("need at least one shot"));
    }
    if !(readout_ms > 0.0) {
        return Err(Error::domain("readout duration must be > 0"));
    }
    let samples: Vec<u64> = (0..shots)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let state = if rng.random::<f64>() < p_minus {
                ChargeState::Negative
            } else {
                ChargeState::Neutral
            };
            readout(state, rates_during_readout, em, readout_ms, &mut rng).0
        })
        .collect();
    Ok(CountHistogram::from_samples(samples))
}

//! Single-shot charge-state readout by a photon-count threshold.

use serde::{Deserialize, Serialize};

use super::curves::FlipObservation;
use super::mixture::{ln_pmf_table, PoissonMixture};
use crate::error::{Error, Result};
use crate::sim::ShotRecord;
use crate::units::ChargeState;

/// Counts `>= threshold` are read as NV⁻.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdClassifier {
    pub threshold: u64,
    /// P(read NV⁻ | NV⁻).
    pub fidelity_minus: f64,
    /// P(read NV⁰ | NV⁰).
    pub fidelity_zero: f64,
}

impl ThresholdClassifier {
    pub fn classify(&self, count: u64) -> ChargeState {
        if count >= self.threshold {
            ChargeState::Negative
        } else {
            ChargeState::Neutral
        }
    }
}

/// P(X < t) for t = 0..=max_t under Poisson(mean).
pub fn poisson_cdf_below(mean: f64, max_t: usize) -> Vec<f64> {
    let lp = ln_pmf_table(mean, max_t);
    let mut out = Vec::with_capacity(max_t + 1);
    let mut acc: f64 = 0.0;
    for k in 0..=max_t {
        out.push(acc.min(1.0));
        acc += lp[k].exp();
    }
    out
}

/// Total misclassification probability of each threshold 0..=max_t.
pub fn threshold_errors(m: &PoissonMixture, max_t: usize) -> Vec<f64> {
    let w_minus = m.weight_minus();
    let below_zero = poisson_cdf_below(m.mu_zero, max_t);
    let below_minus = poisson_cdf_below(m.mu_minus, max_t);
    (0..=max_t)
        .map(|t| (1.0 - w_minus) * (1.0 - below_zero[t]) + w_minus * below_minus[t])
        .collect()
}

/// Threshold minimising the prior-weighted error, with analytic fidelities.
pub fn make_threshold_classifier(m: &PoissonMixture) -> Result<ThresholdClassifier> {
    if !m.resolved {
        return Err(Error::UnresolvedMixture { separation: m.mu_minus - m.mu_zero });
    }
    // Beyond this every threshold misses almost all of NV⁻.
    let max_t = (m.mu_minus + 10.0 * m.mu_minus.sqrt() + 10.0).ceil() as usize;
    let errors = threshold_errors(m, max_t);
    let threshold = errors
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (t, &e)| if e < best.1 { (t, e) } else { best })
        .0;
    let below_zero = poisson_cdf_below(m.mu_zero, threshold);
    let below_minus = poisson_cdf_below(m.mu_minus, threshold);
    Ok(ThresholdClassifier {
        threshold: threshold as u64,
        fidelity_minus: 1.0 - below_minus[threshold],
        fidelity_zero: below_zero[threshold],
    })
}

/// Flips observed between the two readouts of each shot, split by the
/// state read before the probe pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlipCounts {
    pub from_minus_flips: u64,
    pub from_minus_trials: u64,
    pub from_zero_flips: u64,
    pub from_zero_trials: u64,
}

impl FlipCounts {
    pub fn tally(records: &[ShotRecord], classifier: &ThresholdClassifier) -> Self {
        let mut out = Self::default();
        for r in records {
            let pre = classifier.classify(r.pre_counts);
            let flipped = classifier.classify(r.post_counts) != pre;
            match pre {
                ChargeState::Negative => {
                    out.from_minus_trials += 1;
                    out.from_minus_flips += flipped as u64;
                }
                ChargeState::Neutral => {
                    out.from_zero_trials += 1;
                    out.from_zero_flips += flipped as u64;
                }
            }
        }
        out
    }

    /// Flip observations (with Wilson uncertainties) for every non-empty branch.
    pub fn observations(&self, duration: f64) -> Vec<FlipObservation<f64>> {
        let mut out = Vec::new();
        if self.from_minus_trials > 0 {
            out.push(
                FlipObservation::from_counts(duration, ChargeState::Negative, self.from_minus_flips, self.from_minus_trials)
                    .expect("valid counts"),
            );
        }
        if self.from_zero_trials > 0 {
            out.push(
                FlipObservation::from_counts(duration, ChargeState::Neutral, self.from_zero_flips, self.from_zero_trials)
                    .expect("valid counts"),
            );
        }
        out
    }
}

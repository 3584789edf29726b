use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use super::rng::{stream_rng, SimRng};
use super::EmissionModel;
use crate::error::{Error, Result};
use crate::kinetics::{steady_state, TwoStateRates};
use crate::units::ChargeState;

/// Binned photon counts. `true_path` (synthetic traces only) holds the
/// majority-occupancy state of each bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonTrace {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub true_path: Option<Vec<ChargeState>>,
}

impl PhotonTrace {
    pub fn new(bin_width: f64, counts: Vec<u64>, true_path: Option<Vec<ChargeState>>) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(Error::domain("bin width must be > 0"));
        }
        if counts.is_empty() {
            return Err(Error::InsufficientData("trace has no bins".into()));
        }
        if let Some(p) = &true_path {
            if p.len() != counts.len() {
                return Err(Error::domain("true_path length differs from counts"));
            }
        }
        Ok(Self { bin_width, counts, true_path })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.bin_width * self.counts.len() as f64
    }
}

/// Sample path of the continuous-time charge-state chain on `[0, duration)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    pub initial: ChargeState,
    /// Strictly increasing jump times in `(0, duration)`.
    pub jump_times: Vec<f64>,
    pub duration: f64,
}

/// One sojourn in a charge state. `censored` dwells touch the start or end
/// of the observation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dwell {
    pub state: ChargeState,
    pub length: f64,
    pub censored: bool,
}

impl JumpPath {
    pub fn state_at(&self, t: f64) -> ChargeState {
        let n = self.jump_times.partition_point(|&j| j <= t);
        if n % 2 == 0 {
            self.initial
        } else {
            self.initial.other()
        }
    }

    pub fn final_state(&self) -> ChargeState {
        if self.jump_times.len() % 2 == 0 {
            self.initial
        } else {
            self.initial.other()
        }
    }

    pub fn dwells(&self) -> Vec<Dwell> {
        let mut out = Vec::with_capacity(self.jump_times.len() + 1);
        let mut start = 0.0;
        let mut state = self.initial;
        for (k, &t) in self.jump_times.iter().enumerate() {
            out.push(Dwell { state, length: t - start, censored: k == 0 });
            start = t;
            state = state.other();
        }
        out.push(Dwell { state, length: self.duration - start, censored: true });
        out
    }

    /// Time spent in NV⁻ within `[a, b)`.
    pub fn time_negative(&self, a: f64, b: f64) -> f64 {
        let mut k = self.jump_times.partition_point(|&j| j <= a);
        let mut state = if k % 2 == 0 { self.initial } else { self.initial.other() };
        let mut t = a;
        let mut acc = 0.0;
        while t < b {
            let next = self.jump_times.get(k).copied().unwrap_or(f64::INFINITY).min(b);
            if state == ChargeState::Negative {
                acc += next - t;
            }
            t = next;
            state = state.other();
            k += 1;
        }
        acc
    }
}

/// Exact jump-process path by exponential waiting times.
pub fn simulate_jump_path<R: Rng + ?Sized>(
    rates: &TwoStateRates<f64>,
    initial: ChargeState,
    duration: f64,
    rng: &mut R,
) -> JumpPath {
    let mut jumps = Vec::new();
    let mut state = initial;
    let mut t = 0.0;
    loop {
        let rate = rates.exit_rate(state);
        if rate <= 0.0 {
            break;
        }
        let wait: f64 = Exp::new(rate).expect("positive rate").sample(rng);
        t += wait;
        if t >= duration {
            break;
        }
        jumps.push(t);
        state = state.other();
    }
    JumpPath { initial, jump_times: jumps, duration }
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// Bins a jump path into Poisson photon counts with the time-weighted mean
/// intensity of each bin.
pub fn bin_path<R: Rng + ?Sized>(path: &JumpPath, em: &EmissionModel, rng: &mut R) -> PhotonTrace {
    let n_bins = (path.duration / em.bin_width + 1e-9).floor() as usize;
    let mut counts = Vec::with_capacity(n_bins);
    let mut states = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        let a = i as f64 * em.bin_width;
        let b = a + em.bin_width;
        let t_minus = path.time_negative(a, b);
        let t_zero = em.bin_width - t_minus;
        counts.push(poisson_count(em.fl_minus * t_minus + em.fl_zero * t_zero, rng));
        let start = path.state_at(a);
        let majority = if t_minus > t_zero {
            ChargeState::Negative
        } else if t_zero > t_minus {
            ChargeState::Neutral
        } else {
            start
        };
        states.push(majority);
    }
    PhotonTrace { bin_width: em.bin_width, counts, true_path: Some(states) }
}

/// Continuous-illumination trace starting in a fixed state.
pub fn simulate_trace_from(
    rates: &TwoStateRates<f64>,
    em: &EmissionModel,
    duration: f64,
    initial: ChargeState,
    seed: u64,
) -> Result<PhotonTrace> {
    em.validate()?;
    if !(duration >= em.bin_width) {
        return Err(Error::domain(format!(
            "duration {duration} ms shorter than one bin ({} ms)",
            em.bin_width
        )));
    }
    let mut rng: SimRng = stream_rng(seed, 0);
    let path = simulate_jump_path(rates, initial, duration, &mut rng);
    Ok(bin_path(&path, em, &mut rng))
}

/// Continuous-illumination trace whose initial state is drawn from the
/// steady state (NV⁻ if the chain is frozen).
pub fn simulate_trace(
    rates: &TwoStateRates<f64>,
    em: &EmissionModel,
    duration: f64,
    seed: u64,
) -> Result<PhotonTrace> {
    let p_minus = steady_state(rates).map(|d| d.p_minus).unwrap_or(1.0);
    let mut rng: SimRng = stream_rng(seed, u64::MAX);
    let initial = if rng.random::<f64>() < p_minus {
        ChargeState::Negative
    } else {
        ChargeState::Neutral
    };
    simulate_trace_from(rates, em, duration, initial, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn em() -> EmissionModel {
        EmissionModel::new(2.2, 0.3, 1.0).unwrap()
    }

    #[test]
    fn frozen_chain_is_constant() {
        let r = TwoStateRates::zero();
        let tr = simulate_trace_from(&r, &em(), 2000.0, ChargeState::Negative, 3).unwrap();
        assert_eq!(tr.len(), 2000);
        assert!(tr.true_path.as_ref().unwrap().iter().all(|&s| s == ChargeState::Negative));
        let mean = tr.counts.iter().sum::<u64>() as f64 / tr.len() as f64;
        assert!((mean - 2.2).abs() < 0.15, "{mean}");
    }

    #[test]
    fn deterministic_under_seed() {
        let r = TwoStateRates::from_lifetimes(56.6, 465.0).unwrap();
        let a = simulate_trace(&r, &em(), 5000.0, 11).unwrap();
        let b = simulate_trace(&r, &em(), 5000.0, 11).unwrap();
        let c = simulate_trace(&r, &em(), 5000.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_short_duration() {
        let r = TwoStateRates::zero();
        assert!(simulate_trace(&r, &em(), 0.5, 1).is_err());
    }

    #[test]
    fn occupancy_bookkeeping() {
        let path = JumpPath { initial: ChargeState::Negative, jump_times: vec![1.5, 2.25], duration: 4.0 };
        assert_eq!(path.time_negative(0.0, 1.0), 1.0);
        assert_eq!(path.time_negative(1.0, 2.0), 0.5);
        assert_eq!(path.time_negative(2.0, 3.0), 0.75);
        assert_eq!(path.state_at(1.5), ChargeState::Neutral);
        assert_eq!(path.final_state(), ChargeState::Negative);
        let d = path.dwells();
        assert_eq!(d.len(), 3);
        assert!(d[0].censored && !d[1].censored && d[2].censored);
        assert_eq!(d[1].length, 0.75);
    }

    #[test]
    fn majority_with_tie_keeps_start_state() {
        let em = EmissionModel::new(1.0, 0.0, 1.0).unwrap();
        let path = JumpPath { initial: ChargeState::Neutral, jump_times: vec![0.5, 1.9], duration: 2.0 };
        let tr = bin_path(&path, &em, &mut stream_rng(0, 0));
        let states = tr.true_path.unwrap();
        assert_eq!(states, vec![ChargeState::Neutral, ChargeState::Negative]);
    }
}

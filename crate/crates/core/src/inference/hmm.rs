//! Two-state hidden Markov model with Poisson emissions for binned
//! telegraph traces.
//!
//! The per-bin transition matrix is the exact exponential of the two-state
//! generator over one bin, P = exp(Q·Δt), so the off-diagonal entries are
//! (λ/λ_tot)(1 − e^(−λ_tot·Δt)) and fitted probabilities map back to rates
//! without discretisation bias. Baum–Welch runs in scaled probability space;
//! Viterbi in log space. State index 0 is NV⁻ (bright), 1 is NV⁰.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{steady_state, TwoStateRates};
use crate::sim::{EmissionModel, PhotonTrace};
use crate::units::ChargeState;

/// Minimum trace length accepted by [`hmm_fit`].
pub const MIN_BINS: usize = 100;

/// Discrete-time parameters: initial distribution, per-bin transition
/// matrix (rows sum to one) and Poisson means per bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonHmm {
    pub initial: [f64; 2],
    pub transition: [[f64; 2]; 2],
    pub means: [f64; 2],
}

/// ln k! for k = 0..=max.
fn ln_factorials(max: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=max {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

fn poisson_log_pmf(k: u64, mean: f64, ln_fact: &[f64]) -> f64 {
    if mean <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mean.ln() - mean - ln_fact[k as usize]
}

/// Transition probabilities of one bin for continuous-time rates.
pub fn transition_from_rates(rates: &TwoStateRates<f64>, bin_width: f64) -> [[f64; 2]; 2] {
    let total = rates.total();
    let (a, b) = if total > 0.0 {
        let relaxed = -(-total * bin_width).exp_m1();
        (rates.ionization / total * relaxed, rates.recombination / total * relaxed)
    } else {
        (0.0, 0.0)
    };
    [[1.0 - a, a], [b, 1.0 - b]]
}

/// Inverse of [`transition_from_rates`]. Off-diagonals summing to ≥ 1 are
/// not the exponential of any two-state generator and are clamped.
pub fn rates_from_transition(p: &[[f64; 2]; 2], bin_width: f64) -> TwoStateRates<f64> {
    let a = p[0][1].max(0.0);
    let b = p[1][0].max(0.0);
    let s = a + b;
    if s <= 0.0 {
        return TwoStateRates::zero();
    }
    let s_clamped = s.min(1.0 - 1e-12);
    let total = -(1.0 - s_clamped).ln() / bin_width;
    TwoStateRates { ionization: a / s * total, recombination: b / s * total }
}

struct Posterior {
    gamma: Vec<[f64; 2]>,
    xi: [[f64; 2]; 2],
    log_likelihood: f64,
}

impl PoissonHmm {
    fn emission_table(&self, counts: &[u64], ln_fact: &[f64]) -> (Vec<[f64; 2]>, f64) {
        let mut log_offset = 0.0;
        let table = counts
            .iter()
            .map(|&k| {
                let l = [poisson_log_pmf(k, self.means[0], ln_fact), poisson_log_pmf(k, self.means[1], ln_fact)];
                let m = l[0].max(l[1]);
                log_offset += m;
                [(l[0] - m).exp(), (l[1] - m).exp()]
            })
            .collect();
        (table, log_offset)
    }

    /// log p(counts) by the scaled forward recursion.
    pub fn log_likelihood(&self, counts: &[u64]) -> f64 {
        let ln_fact = ln_factorials(counts.iter().copied().max().unwrap_or(0));
        let (em, offset) = self.emission_table(counts, &ln_fact);
        let mut alpha = [self.initial[0] * em[0][0], self.initial[1] * em[0][1]];
        let mut ll = offset;
        for t in 0..counts.len() {
            if t > 0 {
                let p = &self.transition;
                alpha = [
                    (alpha[0] * p[0][0] + alpha[1] * p[1][0]) * em[t][0],
                    (alpha[0] * p[0][1] + alpha[1] * p[1][1]) * em[t][1],
                ];
            }
            let c = alpha[0] + alpha[1];
            if c <= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += c.ln();
            alpha = [alpha[0] / c, alpha[1] / c];
        }
        ll
    }

    fn posterior(&self, counts: &[u64], ln_fact: &[f64]) -> Result<Posterior> {
        let n = counts.len();
        let (em, offset) = self.emission_table(counts, ln_fact);
        let p = &self.transition;
        let mut alpha = vec![[0.0; 2]; n];
        let mut scale = vec![0.0; n];
        for t in 0..n {
            let a = if t == 0 {
                [self.initial[0] * em[0][0], self.initial[1] * em[0][1]]
            } else {
                let prev = alpha[t - 1];
                [
                    (prev[0] * p[0][0] + prev[1] * p[1][0]) * em[t][0],
                    (prev[0] * p[0][1] + prev[1] * p[1][1]) * em[t][1],
                ]
            };
            let c = a[0] + a[1];
            if !(c > 0.0) {
                return Err(Error::ModelMismatch(format!("observation at bin {t} has zero likelihood")));
            }
            scale[t] = c;
            alpha[t] = [a[0] / c, a[1] / c];
        }
        let mut beta = [1.0, 1.0];
        let mut gamma = vec![[0.0; 2]; n];
        let mut xi = [[0.0; 2]; 2];
        gamma[n - 1] = alpha[n - 1];
        for t in (0..n - 1).rev() {
            let e = em[t + 1];
            let w = [e[0] * beta[0], e[1] * beta[1]];
            let c = scale[t + 1];
            for i in 0..2 {
                for j in 0..2 {
                    xi[i][j] += alpha[t][i] * p[i][j] * w[j] / c;
                }
            }
            beta = [(p[0][0] * w[0] + p[0][1] * w[1]) / c, (p[1][0] * w[0] + p[1][1] * w[1]) / c];
            let g = [alpha[t][0] * beta[0], alpha[t][1] * beta[1]];
            let s = g[0] + g[1];
            gamma[t] = [g[0] / s, g[1] / s];
        }
        let log_likelihood = offset + scale.iter().map(|c| c.ln()).sum::<f64>();
        Ok(Posterior { gamma, xi, log_likelihood })
    }

    /// Most likely state sequence.
    pub fn viterbi(&self, counts: &[u64]) -> Vec<ChargeState> {
        let n = counts.len();
        if n == 0 {
            return Vec::new();
        }
        let ln_fact = ln_factorials(counts.iter().copied().max().unwrap_or(0));
        let lp = self.transition.map(|row| row.map(f64::ln));
        let le = |k: u64, s: usize| poisson_log_pmf(k, self.means[s], &ln_fact);
        let mut delta = [self.initial[0].ln() + le(counts[0], 0), self.initial[1].ln() + le(counts[0], 1)];
        let mut back = vec![[0u8; 2]; n];
        for t in 1..n {
            let mut next = [0.0; 2];
            for j in 0..2 {
                let from0 = delta[0] + lp[0][j];
                let from1 = delta[1] + lp[1][j];
                let (best, arg) = if from1 > from0 { (from1, 1) } else { (from0, 0) };
                next[j] = best + le(counts[t], j);
                back[t][j] = arg;
            }
            delta = next;
        }
        let mut s = if delta[1] > delta[0] { 1 } else { 0 };
        let mut path = vec![ChargeState::Negative; n];
        for t in (0..n).rev() {
            path[t] = ChargeState::from_index(s);
            s = back[t][s] as usize;
        }
        path
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmEstimate {
    /// Rates from the exact inverse of the fitted per-bin transition matrix.
    pub rates: TwoStateRates<f64>,
    /// Naive rates p_switch/Δt, for comparison with first-order analyses.
    pub raw_rates: TwoStateRates<f64>,
    /// Fitted fluorescence levels. In the single-state fallback both levels
    /// equal the trace mean.
    pub emission: EmissionModel,
    pub initial: [f64; 2],
    pub path: Vec<ChargeState>,
    pub log_likelihood: f64,
    /// Log-likelihood after each EM iteration.
    pub log_likelihood_trace: Vec<f64>,
    pub n_iterations: usize,
    pub converged: bool,
    /// The trace shows no second level; rates are zero.
    pub single_state: bool,
}

impl HmmEstimate {
    pub fn lifetime_minus(&self) -> f64 {
        self.rates.lifetime_minus()
    }

    pub fn lifetime_zero(&self) -> f64 {
        self.rates.lifetime_zero()
    }

    /// NV⁻ population T₋/(T₋ + T₀) from the fitted lifetimes.
    pub fn population_minus(&self) -> Option<f64> {
        steady_state(&self.rates).ok().map(|d| d.p_minus)
    }

    fn model(&self) -> PoissonHmm {
        PoissonHmm {
            initial: self.initial,
            transition: transition_from_rates(&self.rates, self.emission.bin_width),
            means: [self.emission.fl_minus * self.emission.bin_width, self.emission.fl_zero * self.emission.bin_width],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HmmOptions {
    pub max_iterations: usize,
    /// Stop when the log-likelihood gain falls below `tol·|log L|`.
    pub tol: f64,
}

impl Default for HmmOptions {
    fn default() -> Self {
        Self { max_iterations: 1000, tol: 1e-11 }
    }
}

/// 1-D two-means clustering. Returns (low, high) centres.
fn two_means(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |f: f64| sorted[((sorted.len() - 1) as f64 * f) as usize];
    let (mut lo, mut hi) = (q(0.1), q(0.9));
    if lo == hi {
        lo = sorted[0];
        hi = *sorted.last().expect("non-empty");
    }
    for _ in 0..100 {
        let cut = 0.5 * (lo + hi);
        let (mut sl, mut nl, mut sh, mut nh) = (0.0, 0usize, 0.0, 0usize);
        for &v in values {
            if v <= cut {
                sl += v;
                nl += 1;
            } else {
                sh += v;
                nh += 1;
            }
        }
        let new = (if nl > 0 { sl / nl as f64 } else { lo }, if nh > 0 { sh / nh as f64 } else { hi });
        if new == (lo, hi) {
            break;
        }
        (lo, hi) = new;
    }
    (lo, hi)
}

/// Centred moving average over `window` bins, truncated at the ends.
fn moving_average(counts: &[u64], window: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(counts.len() + 1);
    prefix.push(0u64);
    for &c in counts {
        prefix.push(prefix.last().expect("non-empty") + c);
    }
    let half = window / 2;
    (0..counts.len())
        .map(|t| {
            let a = t.saturating_sub(half);
            let b = (t + window - half).min(counts.len());
            (prefix[b] - prefix[a]) as f64 / (b - a) as f64
        })
        .collect()
}

/// Seed from two-means on counts averaged over `window` bins: levels are
/// the raw mean counts of each class, switching probabilities the observed
/// level-crossing frequencies.
fn seed_model(counts: &[u64], window: usize) -> Option<PoissonHmm> {
    let smooth = moving_average(counts, window);
    let (lo, hi) = two_means(&smooth);
    if !(hi > lo) {
        return None;
    }
    let cut = 0.5 * (lo + hi);
    let labels: Vec<usize> = smooth.iter().map(|&v| if v > cut { 0 } else { 1 }).collect();
    let mut sums = [0.0; 2];
    let mut occupancy = [0usize; 2];
    let mut switches = [0usize; 2];
    for (&l, &c) in labels.iter().zip(counts) {
        sums[l] += c as f64;
    }
    for w in labels.windows(2) {
        occupancy[w[0]] += 1;
        if w[0] != w[1] {
            switches[w[0]] += 1;
        }
    }
    let total = [sums[0], sums[1]];
    let n = [
        labels.iter().filter(|&&l| l == 0).count(),
        labels.iter().filter(|&&l| l == 1).count(),
    ];
    if n[0] == 0 || n[1] == 0 {
        return None;
    }
    let means = [total[0] / n[0] as f64, total[1] / n[1] as f64];
    if !(means[0] > means[1]) {
        return None;
    }
    let prob = |s: usize| {
        if occupancy[s] == 0 {
            0.5
        } else {
            (switches[s] as f64 / occupancy[s] as f64).clamp(1e-6, 0.45)
        }
    };
    let (a, b) = (prob(0), prob(1));
    Some(PoissonHmm {
        initial: [0.5, 0.5],
        transition: [[1.0 - a, a], [b, 1.0 - b]],
        means: [means[0], means[1].max(1e-9 * means[0])],
    })
}

/// Smoothing windows tried when seeding without a prior estimate.
const SEED_WINDOWS: [usize; 3] = [1, 5, 25];

struct EmRun {
    model: PoissonHmm,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn baum_welch(mut model: PoissonHmm, counts: &[u64], ln_fact: &[f64], opts: &HmmOptions) -> Result<EmRun> {
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let post = model.posterior(counts, ln_fact)?;
        let ll = post.log_likelihood;
        if let Some(&prev) = history.last() {
            if ll < prev - 1e-9 * prev.abs().max(1.0) {
                return Err(Error::LikelihoodDecrease { iteration: iterations, before: prev, after: ll });
            }
            if ll - prev <= opts.tol * ll.abs() {
                history.push(ll);
                converged = true;
                break;
            }
        }
        history.push(ll);
        iterations += 1;

        let mut occ = [0.0; 2];
        let mut weighted = [0.0; 2];
        for (g, &c) in post.gamma.iter().zip(counts) {
            for s in 0..2 {
                occ[s] += g[s];
                weighted[s] += g[s] * c as f64;
            }
        }
        let last = post.gamma[counts.len() - 1];
        let mut next = model;
        next.initial = post.gamma[0];
        for i in 0..2 {
            let from = occ[i] - last[i];
            if from > 0.0 {
                let a = post.xi[i][1 - i] / from;
                next.transition[i] = if i == 0 { [1.0 - a, a] } else { [a, 1.0 - a] };
            }
            if occ[i] > 0.0 {
                next.means[i] = weighted[i] / occ[i];
            }
        }
        model = next;
    }
    Ok(EmRun { model, history, iterations, converged })
}

fn single_state_estimate(trace: &PhotonTrace) -> HmmEstimate {
    let mean = trace.counts.iter().sum::<u64>() as f64 / trace.len() as f64 / trace.bin_width;
    HmmEstimate {
        rates: TwoStateRates::zero(),
        raw_rates: TwoStateRates::zero(),
        emission: EmissionModel { fl_minus: mean, fl_zero: mean, bin_width: trace.bin_width },
        initial: [1.0, 0.0],
        path: vec![ChargeState::Negative; trace.len()],
        log_likelihood: f64::NAN,
        log_likelihood_trace: Vec::new(),
        n_iterations: 0,
        converged: false,
        single_state: true,
    }
}

/// Baum–Welch fit of a two-level telegraph trace.
///
/// Without `init`, levels are seeded by two-means clustering of the bin
/// counts averaged over 1, 5 and 25 bins, switching probabilities by
/// counting level crossings of each classification; the run reaching the
/// highest likelihood is kept.
pub fn hmm_fit(trace: &PhotonTrace, init: Option<&HmmEstimate>) -> Result<HmmEstimate> {
    hmm_fit_with(trace, init, &HmmOptions::default())
}

pub fn hmm_fit_with(trace: &PhotonTrace, init: Option<&HmmEstimate>, opts: &HmmOptions) -> Result<HmmEstimate> {
    if trace.len() < MIN_BINS {
        return Err(Error::InsufficientData(format!("HMM needs >= {MIN_BINS} bins, got {}", trace.len())));
    }
    let dt = trace.bin_width;
    let counts = &trace.counts;
    let seeds: Vec<PoissonHmm> = match init {
        Some(est) if !est.single_state => vec![est.model()],
        _ => {
            let mut seeds: Vec<PoissonHmm> = Vec::new();
            for w in SEED_WINDOWS {
                if let Some(m) = seed_model(counts, w) {
                    if !seeds.contains(&m) {
                        seeds.push(m);
                    }
                }
            }
            seeds
        }
    };
    if seeds.is_empty() {
        return Ok(single_state_estimate(trace));
    }
    let ln_fact = ln_factorials(counts.iter().copied().max().unwrap_or(0));
    let mut best: Option<EmRun> = None;
    for seed in seeds {
        let run = baum_welch(seed, counts, &ln_fact, opts)?;
        let ll = *run.history.last().expect("at least one E-step");
        debug!("HMM run: {} iterations, log L = {ll}, converged = {}", run.iterations, run.converged);
        if best.as_ref().is_none_or(|b| ll > *b.history.last().expect("non-empty")) {
            best = Some(run);
        }
    }
    let EmRun { mut model, history, iterations, converged } = best.expect("at least one seed");

    // Bright level is NV⁻.
    if model.means[1] > model.means[0] {
        model.means.swap(0, 1);
        model.initial.swap(0, 1);
        model.transition = [
            [model.transition[1][1], model.transition[1][0]],
            [model.transition[0][1], model.transition[0][0]],
        ];
    }
    let rates = rates_from_transition(&model.transition, dt);
    let raw_rates = TwoStateRates { ionization: model.transition[0][1] / dt, recombination: model.transition[1][0] / dt };
    let log_likelihood = *history.last().expect("at least one E-step");
    Ok(HmmEstimate {
        rates,
        raw_rates,
        emission: EmissionModel { fl_minus: model.means[0] / dt, fl_zero: model.means[1] / dt, bin_width: dt },
        initial: model.initial,
        path: model.viterbi(counts),
        log_likelihood,
        log_likelihood_trace: history,
        n_iterations: iterations,
        converged,
        single_state: false,
    })
}

//! Two-component Poisson mixture fitted to readout-count histograms, and the
//! NV⁻ population read off its amplitudes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::CountHistogram;

/// Minimum number of shots accepted by [`fit_poisson_mixture`].
pub const MIN_SHOTS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonMixture {
    pub mu_zero: f64,
    pub mu_minus: f64,
    /// Amplitudes in shots; `amp_zero + amp_minus` equals the histogram total.
    pub amp_zero: f64,
    pub amp_minus: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// False when the means are closer than one count or a single Poisson
    /// explains the data as well (BIC); one amplitude is then zero.
    pub resolved: bool,
}

impl PoissonMixture {
    pub fn total(&self) -> f64 {
        self.amp_zero + self.amp_minus
    }

    pub fn weight_minus(&self) -> f64 {
        self.amp_minus / self.total()
    }

    /// Expected shots at each count 0..=max_k for the (NV⁰, NV⁻) components.
    pub fn expected_counts(&self, max_k: usize) -> (Vec<f64>, Vec<f64>) {
        let zero = ln_pmf_table(self.mu_zero, max_k).into_iter().map(|l| self.amp_zero * l.exp()).collect();
        let minus = ln_pmf_table(self.mu_minus, max_k).into_iter().map(|l| self.amp_minus * l.exp()).collect();
        (zero, minus)
    }
}

pub(crate) fn ln_pmf_table(mean: f64, max_k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_k + 1);
    let mut ln_fact = 0.0;
    for k in 0..=max_k {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        out.push(if mean > 0.0 {
            k as f64 * mean.ln() - mean - ln_fact
        } else if k == 0 {
            0.0
        } else {
            f64::NEG_INFINITY
        });
    }
    out
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Maximum-likelihood two-Poisson mixture by EM over histogram bins.
pub fn fit_poisson_mixture(hist: &CountHistogram) -> Result<PoissonMixture> {
    let total = hist.total();
    if total < MIN_SHOTS {
        return Err(Error::InsufficientData(format!("mixture fit needs >= {MIN_SHOTS} shots, got {total}")));
    }
    let n = total as f64;
    let max_k = hist.counts.len() - 1;
    let bins: Vec<(usize, f64)> = hist
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (k, c as f64))
        .collect();

    // Seed by two-means on the histogram.
    let mean = hist.mean();
    let (mut lo, mut hi) = (0.5 * mean, 1.5 * mean + 1.0);
    for _ in 0..200 {
        let cut = 0.5 * (lo + hi);
        let (mut sl, mut nl, mut sh, mut nh) = (0.0, 0.0, 0.0, 0.0);
        for &(k, c) in &bins {
            if (k as f64) <= cut {
                sl += c * k as f64;
                nl += c;
            } else {
                sh += c * k as f64;
                nh += c;
            }
        }
        let new = (if nl > 0.0 { sl / nl } else { lo }, if nh > 0.0 { sh / nh } else { hi });
        if new == (lo, hi) {
            break;
        }
        (lo, hi) = new;
    }
    let mut mu = [lo.max(1e-3), hi.max(lo + 1e-3)];
    let mut w: [f64; 2] = [0.5, 0.5];

    let mut prev_ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let ll_of = |mu: &[f64; 2], w: &[f64; 2]| {
        let t0 = ln_pmf_table(mu[0], max_k);
        let t1 = ln_pmf_table(mu[1], max_k);
        bins.iter()
            .map(|&(k, c)| c * log_add(w[0].ln() + t0[k], w[1].ln() + t1[k]))
            .sum::<f64>()
    };
    while iterations < 5000 {
        let t0 = ln_pmf_table(mu[0], max_k);
        let t1 = ln_pmf_table(mu[1], max_k);
        let mut ll = 0.0;
        let mut resp_mass = [0.0; 2];
        let mut resp_sum = [0.0; 2];
        for &(k, c) in &bins {
            let l0 = w[0].ln() + t0[k];
            let l1 = w[1].ln() + t1[k];
            let lt = log_add(l0, l1);
            ll += c * lt;
            let r1 = (l1 - lt).exp();
            let r0 = 1.0 - r1;
            resp_mass[0] += c * r0;
            resp_mass[1] += c * r1;
            resp_sum[0] += c * r0 * k as f64;
            resp_sum[1] += c * r1 * k as f64;
        }
        if ll < prev_ll - 1e-9 * prev_ll.abs() {
            return Err(Error::LikelihoodDecrease { iteration: iterations, before: prev_ll, after: ll });
        }
        if ll - prev_ll <= 1e-13 * ll.abs() {
            converged = true;
            break;
        }
        prev_ll = ll;
        iterations += 1;
        for s in 0..2 {
            w[s] = resp_mass[s] / n;
            if resp_mass[s] > 0.0 {
                mu[s] = resp_sum[s] / resp_mass[s];
            }
        }
        if w[0] <= 0.0 || w[1] <= 0.0 {
            break;
        }
    }
    if mu[0] > mu[1] {
        mu.swap(0, 1);
        w.swap(0, 1);
    }
    let ll2 = ll_of(&mu, &w);
    let ll1 = ll_of(&[mean, mean], &[0.5, 0.5]);
    // Two extra parameters must pay for themselves: BIC penalty ln(n) each.
    let bic_prefers_single = 2.0 * (ll2 - ll1) < 2.0 * n.ln();
    let resolved = (mu[1] - mu[0]) >= 1.0 && !bic_prefers_single && w[0] > 0.0 && w[1] > 0.0;
    let (amp_zero, amp_minus) = if resolved {
        (w[0] * n, w[1] * n)
    } else if w[1] >= w[0] {
        (0.0, n)
    } else {
        (n, 0.0)
    };
    Ok(PoissonMixture {
        mu_zero: mu[0],
        mu_minus: mu[1],
        amp_zero,
        amp_minus,
        log_likelihood: if resolved { ll2 } else { ll1 },
        iterations,
        converged,
        resolved,
    })
}

/// P(NV⁻) = A₋/(A₋ + A₀).
pub fn population_from_mixture(m: &PoissonMixture) -> Result<f64> {
    let total = m.amp_minus + m.amp_zero;
    if !(total > 0.0) {
        return Err(Error::domain("mixture amplitudes sum to zero"));
    }
    Ok(m.amp_minus / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixture(a_minus: f64, a_zero: f64) -> PoissonMixture {
        PoissonMixture {
            mu_zero: 3.0,
            mu_minus: 30.0,
            amp_zero: a_zero,
            amp_minus: a_minus,
            log_likelihood: 0.0,
            iterations: 0,
            converged: true,
            resolved: true,
        }
    }

    #[test]
    fn population_ratios() {
        assert_eq!(population_from_mixture(&mixture(5.0, 5.0)).unwrap(), 0.5);
        assert_eq!(population_from_mixture(&mixture(0.0, 5.0)).unwrap(), 0.0);
        assert!((population_from_mixture(&mixture(70.0, 30.0)).unwrap() - 0.7).abs() < 1e-15);
        assert!(population_from_mixture(&mixture(0.0, 0.0)).is_err());
    }

    #[test]
    fn expected_counts_sum_to_amplitudes() {
        let (z, m) = mixture(700.0, 300.0).expected_counts(200);
        assert!((z.iter().sum::<f64>() - 300.0).abs() < 1e-9);
        assert!((m.iter().sum::<f64>() - 700.0).abs() < 1e-9);
        assert!((z[2] - 300.0 * 4.5 * (-3.0f64).exp()).abs() < 1e-12);
    }

    /// Histogram with expected (rounded) counts of an exact mixture.
    fn expected_histogram(p: f64, mu0: f64, mu1: f64, n: f64) -> CountHistogram {
        let t0 = ln_pmf_table(mu0, 120);
        let t1 = ln_pmf_table(mu1, 120);
        CountHistogram {
            counts: (0..=120)
                .map(|k| (n * ((1.0 - p) * t0[k].exp() + p * t1[k].exp())).round() as u64)
                .collect(),
        }
    }

    #[test]
    fn recovers_expected_mixture() {
        let h = expected_histogram(0.7, 3.0, 30.0, 1e6);
        let m = fit_poisson_mixture(&h).unwrap();
        assert!(m.resolved && m.converged);
        assert!((m.mu_zero - 3.0).abs() < 1e-3 && (m.mu_minus - 30.0).abs() < 1e-3);
        assert!((population_from_mixture(&m).unwrap() - 0.7).abs() < 1e-4);
        assert!((m.total() - h.total() as f64).abs() < 1e-6);
    }

    #[test]
    fn single_poisson_is_flagged() {
        let t = ln_pmf_table(12.0, 60);
        let h = CountHistogram { counts: (0..=60).map(|k| (1e5 * t[k].exp()).round() as u64).collect() };
        let m = fit_poisson_mixture(&h).unwrap();
        assert!(!m.resolved);
        assert!(m.amp_zero == 0.0 || m.amp_minus == 0.0);
    }

    #[test]
    fn needs_enough_shots() {
        let h = CountHistogram { counts: vec![10, 20, 30] };
        assert!(matches!(fit_poisson_mixture(&h), Err(Error::InsufficientData(_))));
    }
}

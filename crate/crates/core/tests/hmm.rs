use nvpd::inference::hmm::transition_from_rates;
use nvpd::inference::{hmm_fit, PoissonHmm};
use nvpd::kinetics::{steady_state, TwoStateRates};
use nvpd::sim::trace::bin_path;
use nvpd::sim::{simulate_jump_path, simulate_trace, EmissionModel, PhotonTrace};
use nvpd::ChargeState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use statrs::distribution::{Discrete, Poisson as PoissonPmf};

/// log p(counts) summed over all 2ⁿ hidden paths.
fn brute_force_log_likelihood(hmm: &PoissonHmm, counts: &[u64]) -> f64 {
    let n = counts.len();
    let pmf = [PoissonPmf::new(hmm.means[0]).unwrap(), PoissonPmf::new(hmm.means[1]).unwrap()];
    let mut terms = Vec::with_capacity(1 << n);
    for code in 0..(1u32 << n) {
        let s = |t: usize| ((code >> t) & 1) as usize;
        let mut lp = hmm.initial[s(0)].ln() + pmf[s(0)].ln_pmf(counts[0]);
        for t in 1..n {
            lp += hmm.transition[s(t - 1)][s(t)].ln() + pmf[s(t)].ln_pmf(counts[t]);
        }
        terms.push(lp);
    }
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[test]
fn forward_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for n in [1usize, 2, 5, 12] {
        for _ in 0..10 {
            let a = rng.random_range(0.01..0.6);
            let b = rng.random_range(0.01..0.6);
            let p0 = rng.random_range(0.05..0.95);
            let hmm = PoissonHmm {
                initial: [p0, 1.0 - p0],
                transition: [[1.0 - a, a], [b, 1.0 - b]],
                means: [rng.random_range(1.0..8.0), rng.random_range(0.05..1.0)],
            };
            let counts: Vec<u64> = (0..n).map(|_| rng.random_range(0..10)).collect();
            let got = hmm.log_likelihood(&counts);
            let want = brute_force_log_likelihood(&hmm, &counts);
            assert!(((got - want) / want).abs() < 1e-10, "n={n}: {got} vs {want}");
        }
    }
}

#[test]
fn em_never_decreases_likelihood() {
    let rates = TwoStateRates::new(0.2, 0.1).unwrap();
    let em = EmissionModel::new(3.0, 1.0, 1.0).unwrap();
    for seed in 0..5 {
        let trace = simulate_trace(&rates, &em, 3000.0, seed).unwrap();
        let est = hmm_fit(&trace, None).unwrap();
        assert!(est.log_likelihood_trace.len() > 2);
        for w in est.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn viterbi_exact_on_bin_aligned_chain() {
    let rates = TwoStateRates::from_lifetimes(56.6, 465.0).unwrap();
    let p = transition_from_rates(&rates, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let pi = steady_state(&rates).unwrap();
    let mut state = if rng.random_bool(pi.p_minus) { 0 } else { 1 };
    let mut path = Vec::new();
    let mut counts = Vec::new();
    for _ in 0..10_000 {
        path.push(ChargeState::from_index(state));
        let mean = if state == 0 { 1000.0 } else { 0.0 };
        counts.push(if mean > 0.0 { Poisson::new(mean).unwrap().sample(&mut rng) as u64 } else { 0 });
        state = if rng.random_bool(p[state][1 - state]) { 1 - state } else { state };
    }
    let trace = PhotonTrace::new(1.0, counts, Some(path.clone())).unwrap();
    let est = hmm_fit(&trace, None).unwrap();
    assert_eq!(est.path, path);
}

#[test]
fn viterbi_exact_away_from_jumps() {
    let rates = TwoStateRates::from_lifetimes(56.6, 465.0).unwrap();
    let em = EmissionModel::new(1000.0, 0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let jumps = simulate_jump_path(&rates, ChargeState::Negative, 10_000.0, &mut rng);
    let trace = bin_path(&jumps, &em, &mut rng);
    let truth = trace.true_path.clone().unwrap();
    let est = hmm_fit(&trace, None).unwrap();
    let mut jump_bins = 0;
    for (k, (got, want)) in est.path.iter().zip(&truth).enumerate() {
        let (a, b) = (k as f64, k as f64 + 1.0);
        let has_jump = jumps.jump_times.iter().any(|&t| t > a && t < b);
        jump_bins += usize::from(has_jump);
        if !has_jump {
            assert_eq!(got, want, "bin {k}");
        }
    }
    assert!(jump_bins > 10);
}

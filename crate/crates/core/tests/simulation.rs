use nvpd::kinetics::{flip_probability, power_scaled_rates, PowerLawRate, TwoStateRates};
use nvpd::sim::correlated::{Pulse, PulseRates, PulseSequence};
use nvpd::sim::trace::bin_path;
use nvpd::sim::{
    simulate_correlated_experiment, simulate_detection_histogram, simulate_jump_path, simulate_trace,
    simulate_trace_from, EmissionModel,
};
use nvpd::units::{Power, Wavelength};
use nvpd::ChargeState;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Exp, Poisson};

/// Critical KS distance at α = 0.01 (asymptotic).
fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[test]
fn dwell_times_are_exponential() {
    let rates = TwoStateRates::from_lifetimes(56.6, 465.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let path = simulate_jump_path(&rates, ChargeState::Negative, 6.0e6, &mut rng);
    for (state, rate) in [(ChargeState::Negative, rates.ionization), (ChargeState::Neutral, rates.recombination)] {
        let mut d: Vec<f64> = path
            .dwells()
            .into_iter()
            .filter(|w| w.state == state && !w.censored)
            .map(|w| w.length)
            .collect();
        d.truncate(10_000);
        assert_eq!(d.len(), 10_000);
        d.sort_by(f64::total_cmp);
        let exp = Exp::new(rate).unwrap();
        let n = d.len() as f64;
        let ks = d
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = exp.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < ks_critical(d.len()), "{state:?}: D = {ks}");
    }
}

#[test]
fn fig1b_dwell_means() {
    let rates = TwoStateRates::from_lifetimes(56.6, 465.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let path = simulate_jump_path(&rates, ChargeState::Negative, 300_000.0, &mut rng);
    let dwells = path.dwells();
    assert!(dwells.iter().filter(|w| !w.censored).count() >= 500);
    for (state, lifetime) in [(ChargeState::Negative, 56.6), (ChargeState::Neutral, 465.0)] {
        let d: Vec<f64> = dwells.iter().filter(|w| w.state == state && !w.censored).map(|w| w.length).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        assert!((mean / lifetime - 1.0).abs() < 0.10, "{state:?}: {mean}");
    }
}

#[test]
fn frozen_chain_is_constant() {
    let em = EmissionModel::new(2.2, 0.3, 1.0).unwrap();
    let tr = simulate_trace_from(&TwoStateRates::zero(), &em, 5000.0, ChargeState::Negative, 52).unwrap();
    assert!(tr.true_path.as_ref().unwrap().iter().all(|s| *s == ChargeState::Negative));
    let mean = tr.counts.iter().sum::<u64>() as f64 / tr.len() as f64;
    assert!((mean - 2.2).abs() < 4.0 * (2.2f64 / 5000.0).sqrt());
}

#[test]
fn equal_emission_is_single_poisson() {
    let rates = TwoStateRates::new(0.3, 0.2).unwrap();
    let em = EmissionModel::new(2.0, 2.0, 1.0).unwrap();
    let tr = simulate_trace(&rates, &em, 100_000.0, 53).unwrap();
    let n = tr.len();
    assert_eq!(n, 100_000);
    let max = *tr.counts.iter().max().unwrap();
    let mut freq = vec![0usize; max as usize + 1];
    for &c in &tr.counts {
        freq[c as usize] += 1;
    }
    let pois = Poisson::new(2.0).unwrap();
    let mut acc = 0usize;
    let mut ks: f64 = 0.0;
    for (k, f) in freq.iter().enumerate() {
        acc += f;
        ks = ks.max((acc as f64 / n as f64 - pois.cdf(k as u64)).abs());
    }
    assert!(ks < ks_critical(n), "D = {ks}");
}

#[test]
fn photon_budget_scales_inversely_with_power() {
    let ion = PowerLawRate::quadratic_only(1.0 / 56.6);
    let rec = PowerLawRate::quadratic_only(1.0 / 465.0);
    let mut products = Vec::new();
    for (k, p) in [0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
        let rates = power_scaled_rates(&ion, &rec, Power::new(p).unwrap());
        let em = EmissionModel::new(2.2 * p, 0.0, 10.0).unwrap();
        let cycle = 1.0 / rates.ionization + 1.0 / rates.recombination;
        let mut rng = ChaCha8Rng::seed_from_u64(60 + k as u64);
        let path = simulate_jump_path(&rates, ChargeState::Negative, 3000.0 * cycle, &mut rng);
        let trace = bin_path(&path, &em, &mut rng);
        let dwells = path.dwells().iter().filter(|w| w.state == ChargeState::Negative).count();
        let per_dwell = trace.counts.iter().sum::<u64>() as f64 / dwells as f64;
        let expected = em.fl_minus / rates.ionization;
        assert!((per_dwell / expected - 1.0).abs() < 0.07, "p={p}: {per_dwell} vs {expected}");
        products.push(per_dwell * p);
    }
    let mean = products.iter().sum::<f64>() / products.len() as f64;
    assert!(products.iter().all(|v| (v / mean - 1.0).abs() < 0.07), "{products:?}");
}

#[test]
fn detection_histogram_matches_mixture() {
    let em = EmissionModel::new(3.0, 0.3, 1.0).unwrap();
    let shots = 100_000u64;
    let h = simulate_detection_histogram(0.7, &em, &TwoStateRates::zero(), 10.0, shots, 54).unwrap();
    let (bright, dark) = (Poisson::new(30.0).unwrap(), Poisson::new(3.0).unwrap());
    let pmf = |k: u64| 0.7 * bright.pmf(k) + 0.3 * dark.pmf(k);
    // Pool adjacent counts until each cell expects at least 5 shots.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut exp_acc, mut obs_acc, mut mass) = (0.0, 0.0, 0.0);
    let kmax = h.counts.len() as u64 + 20;
    for k in 0..=kmax {
        let p = pmf(k);
        mass += p;
        exp_acc += p * shots as f64;
        obs_acc += *h.counts.get(k as usize).unwrap_or(&0) as f64;
        if exp_acc >= 5.0 && (1.0 - mass) * shots as f64 >= 5.0 {
            cells.push((obs_acc, exp_acc));
            exp_acc = 0.0;
            obs_acc = 0.0;
        }
    }
    exp_acc += (1.0 - mass).max(0.0) * shots as f64;
    cells.push((obs_acc, exp_acc));
    let chi2: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let critical = ChiSquared::new((cells.len() - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "χ² = {chi2} > {critical} over {} cells", cells.len());
}

fn pulse(nm: f64, uw: f64, ms: f64) -> Pulse {
    Pulse { wavelength: Wavelength::new(nm).unwrap(), power: Power::new(uw).unwrap(), duration: ms }
}

#[test]
fn correlated_flip_curve_matches_closed_form() {
    let rates = PulseRates {
        init: TwoStateRates::new(10.0, 25.0).unwrap(),
        probe: TwoStateRates::new(0.05, 0.05).unwrap(),
        detect: TwoStateRates::zero(),
    };
    let em = EmissionModel::new(0.66, 0.09, 1.0).unwrap();
    for (k, t) in [2.0, 5.0, 10.0, 20.0, 40.0].into_iter().enumerate() {
        let seq = PulseSequence { init: pulse(532.0, 100.0, 1.0), probe: pulse(470.0, 8.4, t), detect: pulse(594.0, 0.3, 45.0) };
        let shots = simulate_correlated_experiment(&seq, &rates, &em, 10_000, 70 + k as u64).unwrap();
        for start in [ChargeState::Negative, ChargeState::Neutral] {
            let trials: Vec<_> = shots.iter().filter(|s| s.true_pre == Some(start)).collect();
            let flips = trials.iter().filter(|s| s.true_post == Some(start.other())).count();
            let n = trials.len() as f64;
            let p_hat = flips as f64 / n;
            let p = flip_probability(&rates.probe, start, t).unwrap();
            // 99.9 % two-sided binomial band per point.
            let band = 3.29 * (p * (1.0 - p) / n).sqrt();
            assert!((p_hat - p).abs() < band, "t={t} {start:?}: {p_hat} vs {p} ± {band}");
        }
    }
}

#[test]
fn simulations_are_deterministic() {
    let rates = TwoStateRates::from_lifetimes(56.6, 465.0).unwrap();
    let em = EmissionModel::new(2.2, 0.3, 1.0).unwrap();
    assert_eq!(simulate_trace(&rates, &em, 5000.0, 9).unwrap(), simulate_trace(&rates, &em, 5000.0, 9).unwrap());
    assert_ne!(simulate_trace(&rates, &em, 5000.0, 9).unwrap(), simulate_trace(&rates, &em, 5000.0, 10).unwrap());
    let a = simulate_detection_histogram(0.4, &em, &rates, 20.0, 5000, 3).unwrap();
    assert_eq!(a, simulate_detection_histogram(0.4, &em, &rates, 20.0, 5000, 3).unwrap());
}

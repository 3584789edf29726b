use nvpd::inference::fit_saturation;
use nvpd::kinetics::{four_level_steady_state, saturation_curve, FourLevelParams};
use nvpd::units::Power;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Saturation population and power from the analytic steady state:
/// p_S = 1/(1 + λ_EM/λ_MG + σ_ion/σ_re + σ_ion/σ),
/// I_S = (λ_EG + λ_EM + I₀σσ_ion/σ_re)/(σ + σλ_EM/λ_MG + σ_ion + σσ_ion/σ_re).
fn closed_form(fp: &FourLevelParams<f64>) -> (f64, f64) {
    let ratio_ion = if fp.sigma_ion == 0.0 { 0.0 } else { fp.sigma_ion / fp.sigma_re };
    let p_s = 1.0 / (1.0 + fp.lambda_em / fp.lambda_mg + ratio_ion + fp.sigma_ion / fp.sigma);
    let i_s = (fp.lambda_eg + fp.lambda_em + fp.i0 * fp.sigma * ratio_ion)
        / (fp.sigma + fp.sigma * fp.lambda_em / fp.lambda_mg + fp.sigma_ion + fp.sigma * ratio_ion);
    (p_s, i_s)
}

/// Stationary distribution by the Markov-chain tree theorem: π_r is
/// proportional to the summed weight of all spanning trees directed into r.
fn tree_theorem(fp: &FourLevelParams<f64>, intensity: f64) -> [f64; 4] {
    let q = fp.generator(intensity);
    // rate(from → to) = q[to][from]
    let rate = |from: usize, to: usize| q[to * 4 + from];
    let mut pi = [0.0; 4];
    for root in 0..4 {
        let others: Vec<usize> = (0..4).filter(|&k| k != root).collect();
        let mut total = 0.0;
        for code in 0..64usize {
            let mut parent = [usize::MAX; 4];
            let mut ok = true;
            for (slot, &node) in others.iter().enumerate() {
                let p = (code >> (2 * slot)) & 3;
                if p == node {
                    ok = false;
                    break;
                }
                parent[node] = p;
            }
            if !ok {
                continue;
            }
            // Every node must reach the root without revisiting.
            let acyclic = others.iter().all(|&start| {
                let mut cur = start;
                for _ in 0..4 {
                    if cur == root {
                        return true;
                    }
                    cur = parent[cur];
                }
                cur == root
            });
            if !acyclic {
                continue;
            }
            total += others.iter().map(|&n| rate(n, parent[n])).product::<f64>();
        }
        pi[root] = total;
    }
    let s: f64 = pi.iter().sum();
    pi.map(|v| v / s)
}

fn random_params(rng: &mut ChaCha8Rng, with_ionization: bool) -> FourLevelParams<f64> {
    let mut u = |lo: f64, hi: f64| lo * (hi / lo).powf(rng.random::<f64>());
    FourLevelParams {
        sigma: u(0.01, 10.0),
        sigma_ion: if with_ionization { u(1e-4, 1.0) } else { 0.0 },
        sigma_re: u(1e-3, 5.0),
        lambda_eg: u(10.0, 200.0),
        lambda_em: u(0.1, 50.0),
        lambda_mg: u(0.1, 20.0),
        i0: u(1.0, 500.0),
    }
}

#[test]
fn closed_form_without_ionization() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let fp = random_params(&mut rng, false);
        let (p_s, i_s) = closed_form(&fp);
        let intensity = 10f64.powf(rng.random_range(-1.0..3.0));
        let p_e = four_level_steady_state(&fp, Power::new(intensity).unwrap()).unwrap().state.p_e;
        let want = p_s * intensity / (intensity + i_s);
        assert!(((p_e - want) / want).abs() < 1e-10, "{p_e} vs {want}");
    }
}

#[test]
fn closed_form_with_ionization() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let fp = random_params(&mut rng, true);
        let (p_s, i_s) = closed_form(&fp);
        let intensity = 10f64.powf(rng.random_range(-1.0..3.0));
        let p_e = four_level_steady_state(&fp, Power::new(intensity).unwrap()).unwrap().state.p_e;
        let want = p_s * intensity / (intensity + i_s);
        assert!(((p_e - want) / want).abs() < 1e-10, "{p_e} vs {want}");
    }
}

#[test]
fn matches_tree_theorem() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let fp = random_params(&mut rng, true);
        let intensity = 10f64.powf(rng.random_range(-1.0..3.0));
        let s = four_level_steady_state(&fp, Power::new(intensity).unwrap()).unwrap().state;
        let got = [s.p_g, s.p_e, s.p_m, s.p_0];
        let want = tree_theorem(&fp, intensity);
        for k in 0..4 {
            let err = (got[k] - want[k]).abs();
            assert!(err < 1e-10 * want[k] + 1e-14, "level {k}: {} vs {}", got[k], want[k]);
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn saturation_refit_recovers_closed_form() {
    let fp = FourLevelParams {
        sigma: 0.8,
        sigma_ion: 0.02,
        sigma_re: 0.3,
        lambda_eg: 77.0,
        lambda_em: 9.0,
        lambda_mg: 3.3,
        i0: 60.0,
    };
    let grid: Vec<Power<f64>> = (1..=25).map(|k| Power::new(k as f64 * 20.0).unwrap()).collect();
    let efficiency = 2.5;
    let curve = saturation_curve(&fp, &grid, efficiency).unwrap();
    let is: Vec<f64> = curve.iter().map(|c| c.0.uw()).collect();
    let fs: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let fit = fit_saturation(&is, &fs).unwrap();
    let (p_s, i_s) = closed_form(&fp);
    let f_s = efficiency * fp.lambda_eg * p_s;
    assert!(((fit.f_s - f_s) / f_s).abs() < 1e-8);
    assert!(((fit.i_s - i_s) / i_s).abs() < 1e-8);
    let rel = (fit.residual / fs.iter().map(|v| v * v).sum::<f64>()).sqrt();
    assert!(rel < 1e-9, "{rel}");

    // Half of the saturated fluorescence at I = I_S.
    let half = saturation_curve(&fp, &[Power::new(i_s).unwrap()], efficiency).unwrap()[0].1;
    assert!((half / f_s - 0.5).abs() < 1e-12);
}

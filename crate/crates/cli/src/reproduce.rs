//! `nvpd reproduce <figure>`: synthetic simulate → infer → aggregate
//! pipelines emitting plot-ready data series.
//!
//! Ground truth comes from [`crate::synthetic`]. Work units (one trace, one
//! histogram, one flip-curve point) run in parallel; unit `i` draws from
//! `derive_seed(seed, i)`, so outputs do not depend on scheduling.

use std::path::Path;

use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;

use nvpd::inference::{
    fit_flip_curve, fit_ionization_energy, fit_poisson_mixture, fit_quadratic_rate, fit_rate_vs_power, hmm_fit,
    make_threshold_classifier, population_from_mixture, EnergyFit, EnergyFitOptions, FlipCounts, FlipCurveFit,
    FlipObservation, PoissonMixture, PowerLawFit, ThresholdClassifier,
};
use nvpd::kinetics::{evolve, steady_state, ChargeDistribution, TwoStateRates};
use nvpd::sim::rng::derive_seed;
use nvpd::sim::{
    detection_warnings, simulate_correlated_experiment, simulate_trace, CountHistogram, EmissionModel, Pulse, PulseRates,
    PulseSequence,
};
use nvpd::units::{ChargeState, Power, Wavelength};

use crate::config::ReproduceConfig;
use crate::error::{CliError, Result};
use crate::fit::{energy_plot_data, flip_curve_rows, flip_fit_rows, histogram_fit_rows, hmm_rate_sigmas};
use crate::manifest::{Manifest, OutputDir};
use crate::synthetic::{self, BAND_GAP_EV, READOUT_MS, READOUT_NM, READOUT_UW};
use crate::table::{grid, write_rows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5c,
    Fig6,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5c => "fig5c",
            Figure::Fig6 => "fig6",
        }
    }
}

pub fn run(fig: Figure, cfg: &ReproduceConfig, input: Option<(String, Vec<u8>)>, out_dir: &Path) -> Result<Manifest> {
    if !(cfg.scale > 0.0 && cfg.scale.is_finite()) {
        return Err(CliError::config("scale must be > 0"));
    }
    let value = serde_json::to_value(cfg).expect("serialisable config");
    let mut out = OutputDir::create(out_dir, &format!("reproduce {}", fig.name()), value, Some(cfg.seed))?;
    if let Some((name, bytes)) = input {
        out.record_input(&name, &bytes);
    }
    match fig {
        Figure::Fig3 => fig3(cfg, &mut out)?,
        Figure::Fig4 => fig4(cfg, &mut out)?,
        Figure::Fig5c => fig5c(cfg, &mut out)?,
        Figure::Fig6 => fig6(cfg, &mut out)?,
    }
    out.finish()
}

fn uw(p: f64) -> Power<f64> {
    Power::new(p).expect("positive power")
}

fn nm(l: f64) -> Wavelength<f64> {
    Wavelength::new(l).expect("positive wavelength")
}

fn scaled(n: f64, scale: f64, min: f64) -> f64 {
    (n * scale).round().max(min)
}

/// NV⁻ population λ₀₋/λ_tot and its first-order uncertainty.
fn population(r: &TwoStateRates<f64>, s_ion: f64, s_rec: f64) -> (f64, f64) {
    let tot = r.total();
    let p = r.recombination / tot;
    let d_ion = r.recombination / (tot * tot);
    let d_rec = r.ionization / (tot * tot);
    (p, ((d_ion * s_ion).powi(2) + (d_rec * s_rec).powi(2)).sqrt())
}

fn sigma_of(cov: &[f64; 4], i: usize) -> f64 {
    cov[3 * i].max(0.0).sqrt()
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serialisable value")
}

/// Target jump probability per bin for fast dynamics.
const JUMP_FRACTION_PER_BIN: f64 = 0.05;
const TRACE_CYCLES: f64 = 150.0;

/// HMM analysis of one continuous-illumination trace.
#[derive(Debug, Clone, Serialize)]
struct TraceRow {
    wavelength_nm: f64,
    power_uw: f64,
    ionization: f64,
    ionization_sigma: f64,
    recombination: f64,
    recombination_sigma: f64,
    true_ionization: f64,
    true_recombination: f64,
    p_minus: f64,
    p_minus_sigma: f64,
    true_p_minus: f64,
    fl_minus: f64,
    fl_zero: f64,
    true_fl_minus: f64,
    true_fl_zero: f64,
    bin_ms: f64,
    bins: usize,
    converged: bool,
}

/// Simulates `cycles` mean NV⁻/NV⁰ cycles at (λ, p) and fits the HMM. Bins
/// are 1 ms or short enough that a jump falls in under 5 % of them.
fn trace_point(wavelength: f64, power: f64, cycles: f64, seed: u64) -> std::result::Result<TraceRow, String> {
    let truth = synthetic::rates(wavelength, uw(power));
    let bin = (JUMP_FRACTION_PER_BIN / truth.total()).min(1.0);
    let em = synthetic::emission(wavelength, uw(power), bin);
    let duration = cycles * (truth.lifetime_minus() + truth.lifetime_zero());
    let trace = simulate_trace(&truth, &em, duration, seed).map_err(|e| e.to_string())?;
    let est = hmm_fit(&trace, None).map_err(|e| format!("{wavelength} nm, {power} µW: {e}"))?;
    let (s_ion, s_rec) = hmm_rate_sigmas(&est);
    let (p, s_p) = population(&est.rates, s_ion, s_rec);
    Ok(TraceRow {
        wavelength_nm: wavelength,
        power_uw: power,
        ionization: est.rates.ionization,
        ionization_sigma: s_ion,
        recombination: est.rates.recombination,
        recombination_sigma: s_rec,
        true_ionization: truth.ionization,
        true_recombination: truth.recombination,
        p_minus: p,
        p_minus_sigma: s_p,
        true_p_minus: steady_state(&truth).expect("positive rates").p_minus,
        fl_minus: est.emission.fl_minus,
        fl_zero: est.emission.fl_zero,
        true_fl_minus: em.fl_minus,
        true_fl_zero: em.fl_zero,
        bin_ms: bin,
        bins: trace.len(),
        converged: est.converged,
    })
}

fn trace_rows(points: &[(f64, f64)], cycles: f64, seed: u64, out: &mut OutputDir) -> Vec<TraceRow> {
    let results: Vec<_> = points
        .par_iter()
        .enumerate()
        .map(|(i, &(l, p))| trace_point(l, p, cycles, derive_seed(seed, i as u64)))
        .collect();
    let mut rows = Vec::new();
    for r in results {
        match r {
            Ok(row) => {
                if !row.converged {
                    out.warn(format!("HMM at {} nm, {} µW did not converge", row.wavelength_nm, row.power_uw));
                }
                rows.push(row);
            }
            Err(e) => out.warn(format!("trace fit failed: {e}")),
        }
    }
    rows
}

pub const FIG3_WAVELENGTHS: [f64; 2] = [560.0, 593.0];
pub const FIG3_POWERS: [f64; 7] = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];

#[derive(Serialize)]
struct RateCurveRow {
    wavelength_nm: f64,
    power_uw: f64,
    ionization_fit: f64,
    recombination_fit: f64,
    p_minus_fit: f64,
}

#[derive(Serialize)]
struct QuadraticSummary {
    wavelength_nm: f64,
    b_ionization: f64,
    b_ionization_sigma: f64,
    true_b_ionization: f64,
    b_recombination: f64,
    b_recombination_sigma: f64,
    true_b_recombination: f64,
    /// b_rec/(b_ion + b_rec): the power-independent NV⁻ population.
    p_minus: f64,
    true_p_minus: f64,
}

/// Rates vs power with quadratic fits, and the NV⁻ population vs power.
fn fig3(cfg: &ReproduceConfig, out: &mut OutputDir) -> Result<()> {
    let points: Vec<(f64, f64)> =
        FIG3_WAVELENGTHS.iter().flat_map(|&l| FIG3_POWERS.iter().map(move |&p| (l, p))).collect();
    let rows = trace_rows(&points, scaled(TRACE_CYCLES, cfg.scale, 10.0), cfg.seed, out);
    out.write("fig3a_rates.csv", &write_rows(&rows))?;

    let mut curves = Vec::new();
    let mut summary = Vec::new();
    for &l in &FIG3_WAVELENGTHS {
        let sel: Vec<&TraceRow> = rows.iter().filter(|r| r.wavelength_nm == l && r.ionization_sigma.is_finite()).collect();
        let p: Vec<f64> = sel.iter().map(|r| r.power_uw).collect();
        let fit = |rate: fn(&TraceRow) -> (f64, f64)| -> Option<PowerLawFit<f64>> {
            let (y, s): (Vec<f64>, Vec<f64>) = sel.iter().map(|r| rate(r)).unzip();
            fit_quadratic_rate(&p, &y, Some(&s)).ok()
        };
        let (Some(ion), Some(rec)) = (
            fit(|r| (r.ionization, r.ionization_sigma)),
            fit(|r| (r.recombination, r.recombination_sigma)),
        ) else {
            out.warn(format!("quadratic fit at {l} nm failed"));
            continue;
        };
        let (bi, br) = (ion.rate.quadratic, rec.rate.quadratic);
        for x in grid(0.0, 6.5, 66) {
            curves.push(RateCurveRow {
                wavelength_nm: l,
                power_uw: x,
                ionization_fit: bi * x * x,
                recombination_fit: br * x * x,
                p_minus_fit: br / (bi + br),
            });
        }
        let (tbi, tbr) = (synthetic::ionization_quadratic(l), synthetic::recombination_quadratic(l));
        summary.push(QuadraticSummary {
            wavelength_nm: l,
            b_ionization: bi,
            b_ionization_sigma: sigma_of(&ion.covariance, 1),
            true_b_ionization: tbi,
            b_recombination: br,
            b_recombination_sigma: sigma_of(&rec.covariance, 1),
            true_b_recombination: tbr,
            p_minus: br / (bi + br),
            true_p_minus: tbr / (tbi + tbr),
        });
    }
    out.write("fig3a_fit.csv", &write_rows(&curves))?;

    #[derive(Serialize)]
    struct PopulationRow {
        wavelength_nm: f64,
        power_uw: f64,
        p_minus: f64,
        p_minus_sigma: f64,
        true_p_minus: f64,
    }
    let pop: Vec<PopulationRow> = rows
        .iter()
        .map(|r| PopulationRow {
            wavelength_nm: r.wavelength_nm,
            power_uw: r.power_uw,
            p_minus: r.p_minus,
            p_minus_sigma: r.p_minus_sigma,
            true_p_minus: r.true_p_minus,
        })
        .collect();
    out.write("fig3b_population.csv", &write_rows(&pop))?;
    out.write_json("fits.json", &serde_json::json!({ "quadratic_fits": summary }))?;
    Ok(())
}

pub const FIG4_POWER_UW: f64 = 1.0;

pub fn fig4_wavelengths() -> Vec<f64> {
    (0..15).map(|i| 540.0 + 5.0 * i as f64).collect()
}

/// Rates, NV⁻ population and fluorescence levels vs wavelength at 1 µW.
fn fig4(cfg: &ReproduceConfig, out: &mut OutputDir) -> Result<()> {
    let points: Vec<(f64, f64)> = fig4_wavelengths().into_iter().map(|l| (l, FIG4_POWER_UW)).collect();
    let rows = trace_rows(&points, scaled(TRACE_CYCLES, cfg.scale, 10.0), cfg.seed, out);

    #[derive(Serialize)]
    struct RateRow {
        wavelength_nm: f64,
        ionization: f64,
        ionization_sigma: f64,
        recombination: f64,
        recombination_sigma: f64,
        true_ionization: f64,
        true_recombination: f64,
    }
    #[derive(Serialize)]
    struct PopulationRow {
        wavelength_nm: f64,
        p_minus: f64,
        p_minus_sigma: f64,
        true_p_minus: f64,
    }
    #[derive(Serialize)]
    struct FluorescenceRow {
        wavelength_nm: f64,
        fl_minus: f64,
        fl_zero: f64,
        true_fl_minus: f64,
        true_fl_zero: f64,
    }
    let rates: Vec<RateRow> = rows
        .iter()
        .map(|r| RateRow {
            wavelength_nm: r.wavelength_nm,
            ionization: r.ionization,
            ionization_sigma: r.ionization_sigma,
            recombination: r.recombination,
            recombination_sigma: r.recombination_sigma,
            true_ionization: r.true_ionization,
            true_recombination: r.true_recombination,
        })
        .collect();
    let pop: Vec<PopulationRow> = rows
        .iter()
        .map(|r| PopulationRow {
            wavelength_nm: r.wavelength_nm,
            p_minus: r.p_minus,
            p_minus_sigma: r.p_minus_sigma,
            true_p_minus: r.true_p_minus,
        })
        .collect();
    let fl: Vec<FluorescenceRow> = rows
        .iter()
        .map(|r| FluorescenceRow {
            wavelength_nm: r.wavelength_nm,
            fl_minus: r.fl_minus,
            fl_zero: r.fl_zero,
            true_fl_minus: r.true_fl_minus,
            true_fl_zero: r.true_fl_zero,
        })
        .collect();
    out.write("fig4a_rates.csv", &write_rows(&rates))?;
    out.write("fig4b_population.csv", &write_rows(&pop))?;
    out.write("fig4c_fluorescence.csv", &write_rows(&fl))?;
    Ok(())
}

fn readout_pulse() -> Pulse {
    Pulse { wavelength: nm(READOUT_NM), power: uw(READOUT_UW), duration: READOUT_MS }
}

fn readout_emission() -> EmissionModel {
    synthetic::emission(READOUT_NM, uw(READOUT_UW), 1.0)
}

/// Sequence with the given init and probe pulses and the weak readout.
fn sequence(init: (f64, f64, f64), probe: (f64, f64, f64)) -> (PulseSequence, PulseRates) {
    let pulse = |(l, p, t): (f64, f64, f64)| Pulse { wavelength: nm(l), power: uw(p), duration: t };
    let seq = PulseSequence { init: pulse(init), probe: pulse(probe), detect: readout_pulse() };
    let rates = PulseRates {
        init: synthetic::rates(init.0, uw(init.1)),
        probe: synthetic::rates(probe.0, uw(probe.1)),
        detect: synthetic::rates(READOUT_NM, uw(READOUT_UW)),
    };
    (seq, rates)
}

/// Histogram of the first readout after an init pulse.
fn init_histogram(init: (f64, f64, f64), shots: u64, seed: u64) -> Result<CountHistogram> {
    let (seq, rates) = sequence(init, (init.0, init.1, 0.0));
    let records = simulate_correlated_experiment(&seq, &rates, &readout_emission(), shots, seed)?;
    Ok(CountHistogram::from_samples(records.iter().map(|r| r.pre_counts)))
}

pub const FIG5_INIT_UW: f64 = 22.5;
pub const FIG5_INIT_MS: f64 = 100.0;
pub const FIG5_SHORT_INIT_MS: f64 = 0.2;
pub const FIG5B_INIT_NM: f64 = 532.0;
const FIG5_SHOTS: f64 = 20_000.0;

pub fn fig5c_wavelengths() -> Vec<f64> {
    (0..17).map(|i| 450.0 + 10.0 * i as f64).collect()
}

#[derive(Serialize)]
struct MixturePoint {
    wavelength_nm: f64,
    init_ms: f64,
    p_minus: f64,
    p_minus_sigma: f64,
    /// Population at the end of the init pulse.
    true_p_minus: f64,
    steady_state_p_minus: f64,
    mu_zero: f64,
    mu_minus: f64,
    resolved: bool,
}

fn mixture_point(init: (f64, f64, f64), shots: u64, seed: u64) -> Result<(MixturePoint, CountHistogram, PoissonMixture)> {
    let h = init_histogram(init, shots, seed)?;
    let m = fit_poisson_mixture(&h)?;
    let p = population_from_mixture(&m)?;
    let rates = synthetic::rates(init.0, uw(init.1));
    let truth = evolve(&rates, &ChargeDistribution::pure(ChargeState::Negative), init.2)?.p_minus;
    let point = MixturePoint {
        wavelength_nm: init.0,
        init_ms: init.2,
        p_minus: p,
        p_minus_sigma: (p * (1.0 - p) / h.total() as f64).sqrt(),
        true_p_minus: truth,
        steady_state_p_minus: steady_state(&rates)?.p_minus,
        mu_zero: m.mu_zero,
        mu_minus: m.mu_minus,
        resolved: m.resolved,
    };
    Ok((point, h, m))
}

/// NV⁻ population after a 100 ms init pulse vs its wavelength, from
/// Poisson-mixture fits of single-shot readout histograms.
fn fig5c(cfg: &ReproduceConfig, out: &mut OutputDir) -> Result<()> {
    let shots = scaled(FIG5_SHOTS, cfg.scale, 1000.0) as u64;
    let wl = fig5c_wavelengths();
    let results: Vec<Result<_>> = wl
        .par_iter()
        .enumerate()
        .map(|(i, &l)| mixture_point((l, FIG5_INIT_UW, FIG5_INIT_MS), shots, derive_seed(cfg.seed, i as u64)))
        .collect();
    let mut points = Vec::new();
    for (l, r) in wl.iter().zip(results) {
        match r {
            Ok((p, _, m)) => {
                if !m.resolved {
                    out.warn(format!("readout histogram after {l} nm init is not resolved"));
                }
                points.push(p);
            }
            Err(CliError::Model(e)) if e.is_fit_failure() => out.warn(format!("mixture fit at {l} nm failed: {e}")),
            Err(e) => return Err(e),
        }
    }
    out.write("fig5c_population.csv", &write_rows(&points))?;

    let base = wl.len() as u64;
    let (b_point, b_hist, b_mix) =
        mixture_point((FIG5B_INIT_NM, FIG5_INIT_UW, FIG5_INIT_MS), shots, derive_seed(cfg.seed, base))?;
    out.write("fig5b_histogram.csv", &histogram_fit_rows(&b_hist, &b_mix))?;
    let classifier = make_threshold_classifier(&b_mix).ok();

    // An init pulse too short to reach the steady state.
    let short = (FIG5B_INIT_NM, FIG5_INIT_UW, FIG5_SHORT_INIT_MS);
    let (seq, rates) = sequence(short, (short.0, short.1, 0.0));
    for w in detection_warnings(&seq, &rates, &readout_emission()) {
        out.warn(w);
    }
    let (s_point, _, _) = mixture_point(short, shots, derive_seed(cfg.seed, base + 1))?;
    out.write("fig5c_short_init.csv", &write_rows(&[s_point]))?;

    out.write_json(
        "fits.json",
        &serde_json::json!({
            "init_power_uw": FIG5_INIT_UW,
            "init_ms": FIG5_INIT_MS,
            "readout": {"wavelength_nm": READOUT_NM, "power_uw": READOUT_UW, "duration_ms": READOUT_MS},
            "shots_per_point": shots,
            "fig5b": {"mixture": json(&b_mix), "population": json(&b_point), "classifier": classifier.as_ref().map(json)},
        }),
    )?;
    Ok(())
}

pub const FIG6_INIT: (f64, f64, f64) = (532.0, 100.0, 1.0);
pub const FIG6_WAVELENGTHS: [f64; 11] = [435.0, 440.0, 445.0, 450.0, 460.0, 470.0, 480.0, 490.0, 500.0, 510.0, 520.0];
pub const FIG6_POWERS: [f64; 6] = [1.0, 2.0, 4.0, 6.0, 8.4, 12.0];
pub const FIG6_DURATIONS: usize = 8;
/// Wavelength and power of the example flip curve.
pub const FIG6B_POINT: (f64, f64) = (470.0, 8.4);
/// Shortest wavelengths, where recombination has a measurable linear part.
pub const FIG6_RECOMBINATION_POINTS: usize = 4;
const FIG6_SHOTS: f64 = 4000.0;
const FIG6_CALIBRATION_SHOTS: f64 = 20_000.0;

/// Probe durations spanning three relaxation times of the true rates.
fn probe_durations(truth: &TwoStateRates<f64>) -> Vec<f64> {
    let t_max = 3.0 / truth.total();
    (1..=FIG6_DURATIONS).map(|k| t_max * k as f64 / FIG6_DURATIONS as f64).collect()
}

struct FlipPoint {
    wavelength_nm: f64,
    power_uw: f64,
    truth: TwoStateRates<f64>,
    observations: Vec<FlipObservation<f64>>,
    fit: std::result::Result<FlipCurveFit<f64>, nvpd::Error>,
}

fn flip_point(wavelength: f64, power: f64, cl: &ThresholdClassifier, shots: u64, seed: u64) -> Result<FlipPoint> {
    let truth = synthetic::rates(wavelength, uw(power));
    let mut obs = Vec::new();
    for (k, t) in probe_durations(&truth).into_iter().enumerate() {
        let (seq, rates) = sequence(FIG6_INIT, (wavelength, power, t));
        let records = simulate_correlated_experiment(&seq, &rates, &readout_emission(), shots, derive_seed(seed, k as u64))?;
        obs.extend(FlipCounts::tally(&records, cl).observations(t));
    }
    let fit = fit_flip_curve(&obs);
    Ok(FlipPoint { wavelength_nm: wavelength, power_uw: power, truth, observations: obs, fit })
}

#[derive(Serialize)]
struct FlipRateRow {
    wavelength_nm: f64,
    power_uw: f64,
    ionization: f64,
    ionization_sigma: f64,
    recombination: f64,
    recombination_sigma: f64,
    true_ionization: f64,
    true_recombination: f64,
    converged: bool,
}

#[derive(Serialize)]
struct ParabolaCurveRow {
    wavelength_nm: f64,
    power_uw: f64,
    ionization_fit: f64,
    recombination_fit: f64,
}

#[derive(Serialize)]
struct LinearRateRow {
    wavelength_nm: f64,
    energy_ev: f64,
    a_ionization: f64,
    a_ionization_sigma: f64,
    a_recombination: f64,
    a_recombination_sigma: f64,
    true_a_ionization: f64,
    true_a_recombination: f64,
}

fn energy_summary(fit: &EnergyFit<f64>) -> serde_json::Value {
    serde_json::json!({
        "E0_ev": fit.params.e0,
        "E0_sigma_ev": fit.e0_sigma(),
        "sigma_ev": fit.params.sigma,
        "amplitude": fit.params.amplitude,
        "points_used": fit.points_used,
        "converged": fit.converged,
        "extrapolated": fit.extrapolated,
    })
}

/// Flip curves → rates vs power → linear rate coefficients vs photon energy
/// → ionization and recombination band-edge energies.
fn fig6(cfg: &ReproduceConfig, out: &mut OutputDir) -> Result<()> {
    let cal_shots = scaled(FIG6_CALIBRATION_SHOTS, cfg.scale, 1000.0) as u64;
    let shots = scaled(FIG6_SHOTS, cfg.scale, 200.0) as u64;

    let cal = init_histogram(FIG6_INIT, cal_shots, derive_seed(cfg.seed, 0))?;
    let cal_mix = fit_poisson_mixture(&cal)?;
    let cl = make_threshold_classifier(&cal_mix)?;
    out.write("fig6_calibration.csv", &histogram_fit_rows(&cal, &cal_mix))?;

    let points: Vec<(f64, f64)> =
        FIG6_WAVELENGTHS.iter().flat_map(|&l| FIG6_POWERS.iter().map(move |&p| (l, p))).collect();
    let flips: Vec<Result<FlipPoint>> = points
        .par_iter()
        .enumerate()
        .map(|(i, &(l, p))| flip_point(l, p, &cl, shots, derive_seed(cfg.seed, 1 + i as u64)))
        .collect();
    let flips = flips.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for f in &flips {
        let (ion, s_ion, rec, s_rec, conv) = match &f.fit {
            Ok(x) => (x.rates.ionization, x.ionization_sigma(), x.rates.recombination, x.recombination_sigma(), x.converged),
            Err(e) => {
                out.warn(format!("flip fit at {} nm, {} µW failed: {e}", f.wavelength_nm, f.power_uw));
                (f64::NAN, f64::NAN, f64::NAN, f64::NAN, false)
            }
        };
        if !conv && f.fit.is_ok() {
            out.warn(format!("flip fit at {} nm, {} µW did not converge", f.wavelength_nm, f.power_uw));
        }
        rows.push(FlipRateRow {
            wavelength_nm: f.wavelength_nm,
            power_uw: f.power_uw,
            ionization: ion,
            ionization_sigma: s_ion,
            recombination: rec,
            recombination_sigma: s_rec,
            true_ionization: f.truth.ionization,
            true_recombination: f.truth.recombination,
            converged: conv,
        });
    }
    out.write("fig6c_rates.csv", &write_rows(&rows))?;

    if let Some(f) = flips.iter().find(|f| (f.wavelength_nm, f.power_uw) == FIG6B_POINT) {
        if let Ok(fit) = &f.fit {
            let t_max = f.observations.iter().map(|o| o.duration).fold(0.0, f64::max) * 1.2;
            out.write("fig6b_flip.csv", &flip_fit_rows(&f.observations, &fit.rates))?;
            out.write("fig6b_curve.csv", &flip_curve_rows(t_max, &fit.rates))?;
        }
    }

    let mut curves = Vec::new();
    let mut linear = Vec::new();
    for &l in &FIG6_WAVELENGTHS {
        let sel: Vec<&FlipRateRow> =
            rows.iter().filter(|r| r.wavelength_nm == l && r.ionization_sigma > 0.0 && r.recombination_sigma > 0.0).collect();
        let p: Vec<f64> = sel.iter().map(|r| r.power_uw).collect();
        let parabola = |y: Vec<f64>, s: Vec<f64>| fit_rate_vs_power(&p, &y, Some(&s)).ok();
        let ion = parabola(sel.iter().map(|r| r.ionization).collect(), sel.iter().map(|r| r.ionization_sigma).collect());
        let rec = parabola(sel.iter().map(|r| r.recombination).collect(), sel.iter().map(|r| r.recombination_sigma).collect());
        let (Some(ion), Some(rec)) = (ion, rec) else {
            out.warn(format!("parabola fit at {l} nm failed"));
            continue;
        };
        for x in grid(0.0, 13.0, 66) {
            curves.push(ParabolaCurveRow {
                wavelength_nm: l,
                power_uw: x,
                ionization_fit: ion.rate.linear * x + ion.rate.quadratic * x * x,
                recombination_fit: rec.rate.linear * x + rec.rate.quadratic * x * x,
            });
        }
        linear.push(LinearRateRow {
            wavelength_nm: l,
            energy_ev: nm(l).to_energy().ev(),
            a_ionization: ion.rate.linear,
            a_ionization_sigma: sigma_of(&ion.covariance, 0),
            a_recombination: rec.rate.linear,
            a_recombination_sigma: sigma_of(&rec.covariance, 0),
            true_a_ionization: synthetic::ionization_linear(l),
            true_a_recombination: synthetic::recombination_linear(l),
        });
    }
    out.write("fig6c_fit.csv", &write_rows(&curves))?;
    out.write("fig6d_linear_rates.csv", &write_rows(&linear))?;

    let nm_all: Vec<f64> = linear.iter().map(|r| r.wavelength_nm).collect();
    let hw: Vec<_> = nm_all.iter().map(|&l| nm(l).to_energy()).collect();
    let a_ion: Vec<f64> = linear.iter().map(|r| r.a_ionization).collect();
    let s_ion: Vec<f64> = linear.iter().map(|r| r.a_ionization_sigma).collect();
    let ion_opts = EnergyFitOptions::ionization();
    let ion_fit = fit_ionization_energy(&hw, &a_ion, Some(&s_ion), &ion_opts)?;
    let (ion_csv, ion_curve) = energy_plot_data(&nm_all, &a_ion, Some(&s_ion), &ion_fit, &ion_opts);
    out.write("fig6d_ionization_fit.csv", &ion_csv)?;
    out.write("fig6d_ionization_curve.csv", &ion_curve)?;

    let k = FIG6_RECOMBINATION_POINTS.min(linear.len());
    let rec_nm = &nm_all[..k];
    let a_rec: Vec<f64> = linear[..k].iter().map(|r| r.a_recombination).collect();
    let s_rec: Vec<f64> = linear[..k].iter().map(|r| r.a_recombination_sigma).collect();
    let rec_opts = EnergyFitOptions::recombination(ion_fit.params.sigma);
    let rec_fit = fit_ionization_energy(&hw[..k], &a_rec, Some(&s_rec), &rec_opts)?;
    let (rec_csv, rec_curve) = energy_plot_data(rec_nm, &a_rec, Some(&s_rec), &rec_fit, &rec_opts);
    out.write("fig6d_recombination_fit.csv", &rec_csv)?;
    out.write("fig6d_recombination_curve.csv", &rec_curve)?;

    let sum = ion_fit.params.e0 + rec_fit.params.e0;
    out.write_json(
        "fits.json",
        &serde_json::json!({
            "init": {"wavelength_nm": FIG6_INIT.0, "power_uw": FIG6_INIT.1, "duration_ms": FIG6_INIT.2},
            "readout": {"wavelength_nm": READOUT_NM, "power_uw": READOUT_UW, "duration_ms": READOUT_MS},
            "shots_per_duration": shots,
            "classifier": json(&cl),
            "calibration_mixture": json(&cal_mix),
            "ionization": energy_summary(&ion_fit),
            "recombination": energy_summary(&rec_fit),
            "true_E0_ionization_ev": synthetic::E0_ION_EV,
            "true_E0_recombination_ev": synthetic::E0_REC_EV,
            "E0_sum_ev": sum,
            "E0_sum_sigma_ev": ion_fit.e0_sigma().hypot(rec_fit.e0_sigma()),
            "band_gap_ev": BAND_GAP_EV,
            "E0_sum_minus_band_gap_ev": sum - BAND_GAP_EV,
        }),
    )?;
    Ok(())
}

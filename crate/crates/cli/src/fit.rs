//! `nvpd fit <kind>`: estimators applied to files on disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use nvpd::inference::{
    energy_model_rate, fit_flip_curve, fit_ionization_energy, fit_poisson_mixture, fit_quadratic_rate, fit_rate_vs_power,
    fit_saturation, hmm_fit_with, make_threshold_classifier, population_from_mixture, EnergyFit, EnergyFitOptions,
    FitReport, FlipCounts, FlipCurveFit, FlipObservation, HmmEstimate, HmmOptions, PoissonMixture, PowerLawFit,
    SaturationFit, ThresholdClassifier,
};
use nvpd::kinetics::{flip_probability, TwoStateRates};
use nvpd::sim::export::{read_histogram_csv, read_shots_csv, read_trace_csv};
use nvpd::sim::{CountHistogram, PhotonTrace};
use nvpd::units::{ChargeState, PhotonEnergy, Wavelength};

use crate::config::{
    load, ClassifierConfig, CountSource, EnergyBranch, EnergyFitConfig, FlipFitConfig, FlipInput, HistogramFitConfig, Loaded,
    RateModel, RatePowerFitConfig, SaturationFitConfig, TraceHmmConfig,
};
use crate::error::{CliError, Result};
use crate::manifest::{OutputDir, TOOL};
use crate::table::{grid, read_rows, write_rows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitKind {
    TraceHmm,
    Histogram,
    Flip,
    RatePower,
    Saturation,
    Energy,
}

impl FitKind {
    pub fn name(self) -> &'static str {
        match self {
            FitKind::TraceHmm => "trace-hmm",
            FitKind::Histogram => "histogram",
            FitKind::Flip => "flip",
            FitKind::RatePower => "rate-power",
            FitKind::Saturation => "saturation",
            FitKind::Energy => "energy",
        }
    }
}

/// Contents of `<kind>_report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub report: FitReport,
    /// Estimator-specific results not covered by the uniform report.
    pub extra: serde_json::Value,
}

pub struct FitOutcome {
    pub report: FitReport,
    pub warnings: Vec<String>,
}

/// Runs one fit and writes report, plot data and manifest into `out_dir`.
/// A fit that stops without converging still writes its outputs; the
/// caller decides the exit status from `report.converged`.
pub fn run(kind: FitKind, config: &Path, out_dir: &Path) -> Result<FitOutcome> {
    match kind {
        FitKind::TraceHmm => run_with(kind, load::<TraceHmmConfig>(config)?, out_dir, trace_hmm),
        FitKind::Histogram => run_with(kind, load::<HistogramFitConfig>(config)?, out_dir, histogram),
        FitKind::Flip => run_with(kind, load::<FlipFitConfig>(config)?, out_dir, flip),
        FitKind::RatePower => run_with(kind, load::<RatePowerFitConfig>(config)?, out_dir, rate_power),
        FitKind::Saturation => run_with(kind, load::<SaturationFitConfig>(config)?, out_dir, saturation),
        FitKind::Energy => run_with(kind, load::<EnergyFitConfig>(config)?, out_dir, energy),
    }
}

struct Fitted {
    report: FitReport,
    extra: serde_json::Value,
    /// Data next to the fitted model at the same abscissae.
    fit_csv: Option<Vec<u8>>,
    /// The fitted model on a dense grid.
    curve_csv: Option<Vec<u8>>,
}

fn run_with<T: Serialize>(
    kind: FitKind,
    cfg: Loaded<T>,
    out_dir: &Path,
    f: fn(&Loaded<T>, &mut OutputDir) -> Result<Fitted>,
) -> Result<FitOutcome> {
    let value = serde_json::to_value(&cfg.config).expect("serialisable config");
    let command = format!("fit {}", kind.name());
    let mut out = OutputDir::create(out_dir, &command, value, None)?;
    let fitted = f(&cfg, &mut out)?;
    if !fitted.report.converged {
        out.warn(format!("{} fit did not converge after {} iterations", kind.name(), fitted.report.iterations));
    }
    let file = ReportFile {
        tool: TOOL.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command,
        config_sha256: out.config_sha256(),
        inputs: out.inputs().clone(),
        report: fitted.report.clone(),
        extra: fitted.extra,
    };
    let stem = kind.name().replace('-', "_");
    out.write_json(&format!("{}_report.json", stem), &file)?;
    if let Some(b) = fitted.fit_csv {
        out.write(&format!("{}_fit.csv", stem), &b)?;
    }
    if let Some(b) = fitted.curve_csv {
        out.write(&format!("{}_curve.csv", stem), &b)?;
    }
    let manifest = out.finish()?;
    Ok(FitOutcome { report: fitted.report, warnings: manifest.warnings })
}

fn read_input<T>(cfg: &Loaded<T>, rel: &Path, out: &mut OutputDir) -> Result<(std::path::PathBuf, Vec<u8>)> {
    let path = cfg.resolve(rel);
    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    out.record_input(&rel.display().to_string(), &bytes);
    Ok((path, bytes))
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serialisable value")
}

#[derive(Serialize)]
struct TraceFitRow {
    bin_ms: f64,
    counts: u64,
    viterbi_state: &'static str,
    fitted_mean: f64,
}

/// Number of (NV⁻→NV⁰, NV⁰→NV⁻) switches along a path.
pub fn count_transitions(path: &[ChargeState]) -> (u64, u64) {
    let mut out = (0, 0);
    for w in path.windows(2) {
        match (w[0], w[1]) {
            (ChargeState::Negative, ChargeState::Neutral) => out.0 += 1,
            (ChargeState::Neutral, ChargeState::Negative) => out.1 += 1,
            _ => {}
        }
    }
    out
}

/// Rate uncertainties λ/√n from the number of observed switches.
pub fn hmm_rate_sigmas(est: &HmmEstimate) -> (f64, f64) {
    let (n_ion, n_rec) = count_transitions(&est.path);
    let s = |rate: f64, n: u64| if n > 0 { rate / (n as f64).sqrt() } else { f64::INFINITY };
    (s(est.rates.ionization, n_ion), s(est.rates.recombination, n_rec))
}

pub fn trace_fit_rows(trace: &PhotonTrace, est: &HmmEstimate) -> Vec<u8> {
    let rows: Vec<TraceFitRow> = trace
        .counts
        .iter()
        .zip(&est.path)
        .enumerate()
        .map(|(i, (&c, &s))| TraceFitRow {
            bin_ms: i as f64 * trace.bin_width,
            counts: c,
            viterbi_state: s.label(),
            fitted_mean: est.emission.level(s) * trace.bin_width,
        })
        .collect();
    write_rows(&rows)
}

fn trace_hmm(cfg: &Loaded<TraceHmmConfig>, out: &mut OutputDir) -> Result<Fitted> {
    let c = &cfg.config;
    let (path, bytes) = read_input(cfg, &c.input, out)?;
    let trace = read_trace_csv(&bytes[..], c.bin_ms).map_err(|e| CliError::input(&path, e))?;
    let mut opts = HmmOptions::default();
    if let Some(n) = c.max_iterations {
        opts.max_iterations = n;
    }
    if let Some(t) = c.tol {
        opts.tol = t;
    }
    let est = hmm_fit_with(&trace, None, &opts)?;
    if est.single_state {
        out.warn("trace shows a single fluorescence level; rates reported as zero");
    }
    let (n_ion, n_rec) = count_transitions(&est.path);
    let (s_ion, s_rec) = hmm_rate_sigmas(&est);
    let agreement = trace.true_path.as_ref().map(|truth| {
        truth.iter().zip(&est.path).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
    });
    let extra = serde_json::json!({
        "lifetime_minus_ms": est.lifetime_minus(),
        "lifetime_zero_ms": est.lifetime_zero(),
        "fl_minus_per_ms": est.emission.fl_minus,
        "fl_zero_per_ms": est.emission.fl_zero,
        "population_minus": est.population_minus(),
        "transitions": {"ionization": n_ion, "recombination": n_rec},
        "rate_sigma": {"ionization": finite(s_ion), "recombination": finite(s_rec)},
        "bins": trace.len(),
        "bin_ms": trace.bin_width,
        "path_agreement": agreement,
    });
    Ok(Fitted {
        report: FitReport::from(&est),
        extra,
        fit_csv: c.plot_data.then(|| trace_fit_rows(&trace, &est)),
        curve_csv: None,
    })
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Serialize)]
struct HistogramRow {
    count: usize,
    shots: u64,
    fit_zero: f64,
    fit_minus: f64,
    fit_total: f64,
}

pub fn histogram_fit_rows(h: &CountHistogram, m: &PoissonMixture) -> Vec<u8> {
    let max_k = h.counts.len().saturating_sub(1);
    let (z, mi) = m.expected_counts(max_k);
    let rows: Vec<HistogramRow> = (0..=max_k)
        .map(|k| HistogramRow {
            count: k,
            shots: h.counts.get(k).copied().unwrap_or(0),
            fit_zero: z[k],
            fit_minus: mi[k],
            fit_total: z[k] + mi[k],
        })
        .collect();
    write_rows(&rows)
}

fn load_histogram<T>(cfg: &Loaded<T>, rel: &Path, source: CountSource, out: &mut OutputDir) -> Result<CountHistogram> {
    let (path, bytes) = read_input(cfg, rel, out)?;
    let bad = |e: nvpd::Error| CliError::input(&path, e);
    match source {
        CountSource::Histogram => read_histogram_csv(&bytes[..]).map_err(bad),
        CountSource::ShotsPre | CountSource::ShotsPost => {
            let shots = read_shots_csv(&bytes[..]).map_err(bad)?;
            let pre = source == CountSource::ShotsPre;
            Ok(CountHistogram::from_samples(shots.iter().map(|s| if pre { s.pre_counts } else { s.post_counts })))
        }
    }
}

fn histogram(cfg: &Loaded<HistogramFitConfig>, out: &mut OutputDir) -> Result<Fitted> {
    let c = &cfg.config;
    let h = load_histogram(cfg, &c.input, c.source, out)?;
    let m = fit_poisson_mixture(&h)?;
    let p = population_from_mixture(&m)?;
    let classifier = match make_threshold_classifier(&m) {
        Ok(cl) => Some(cl),
        Err(e) => {
            out.warn(format!("no threshold classifier: {e}"));
            None
        }
    };
    let extra = serde_json::json!({
        "population_minus": p,
        "shots": h.total(),
        "classifier": classifier.as_ref().map(json),
    });
    Ok(Fitted {
        report: FitReport::from(&m),
        extra,
        fit_csv: c.plot_data.then(|| histogram_fit_rows(&h, &m)),
        curve_csv: None,
    })
}

#[derive(Debug, Deserialize)]
struct FlipTableRow {
    duration_ms: f64,
    initial: String,
    flips: u64,
    trials: u64,
}

#[derive(Serialize)]
struct FlipFitRow {
    duration_ms: f64,
    initial: &'static str,
    observed: f64,
    sigma: f64,
    fitted: f64,
}

#[derive(Serialize)]
struct FlipCurveRow {
    duration_ms: f64,
    from_minus: f64,
    from_zero: f64,
}

pub fn flip_fit_rows(obs: &[FlipObservation<f64>], rates: &TwoStateRates<f64>) -> Vec<u8> {
    let rows: Vec<FlipFitRow> = obs
        .iter()
        .map(|o| FlipFitRow {
            duration_ms: o.duration,
            initial: o.initial.label(),
            observed: o.probability,
            sigma: o.sigma,
            fitted: flip_probability(rates, o.initial, o.duration).unwrap_or(f64::NAN),
        })
        .collect();
    write_rows(&rows)
}

pub fn flip_curve_rows(max_duration: f64, rates: &TwoStateRates<f64>) -> Vec<u8> {
    let rows: Vec<FlipCurveRow> = grid(0.0, max_duration, 201)
        .into_iter()
        .map(|t| FlipCurveRow {
            duration_ms: t,
            from_minus: flip_probability(rates, ChargeState::Negative, t).unwrap_or(f64::NAN),
            from_zero: flip_probability(rates, ChargeState::Neutral, t).unwrap_or(f64::NAN),
        })
        .collect();
    write_rows(&rows)
}

/// Rates, lifetimes and their uncertainties of a flip-curve fit.
pub fn flip_extra(fit: &FlipCurveFit<f64>) -> serde_json::Value {
    serde_json::json!({
        "ionization_per_ms": fit.rates.ionization,
        "recombination_per_ms": fit.rates.recombination,
        "ionization_sigma": fit.ionization_sigma(),
        "recombination_sigma": fit.recombination_sigma(),
        "lifetime_minus_ms": fit.rates.lifetime_minus(),
        "lifetime_zero_ms": fit.rates.lifetime_zero(),
    })
}

fn flip(cfg: &Loaded<FlipFitConfig>, out: &mut OutputDir) -> Result<Fitted> {
    let c = &cfg.config;
    let mut extra = serde_json::Map::new();
    let obs: Vec<FlipObservation<f64>> = match &c.input {
        FlipInput::Table(rel) => {
            let (path, bytes) = read_input(cfg, rel, out)?;
            let rows: Vec<FlipTableRow> = read_rows(&bytes, &path)?;
            rows.iter()
                .map(|r| {
                    let initial = ChargeState::from_label(&r.initial)
                        .ok_or_else(|| CliError::input(&path, format!("unknown state {:?}", r.initial)))?;
                    FlipObservation::from_counts(r.duration_ms, initial, r.flips, r.trials)
                        .map_err(|e| CliError::input(&path, e))
                })
                .collect::<Result<_>>()?
        }
        FlipInput::Shots { classifier, files } => {
            let cl = match classifier {
                ClassifierConfig::Threshold(t) => {
                    ThresholdClassifier { threshold: *t, fidelity_minus: f64::NAN, fidelity_zero: f64::NAN }
                }
                ClassifierConfig::Calibration(rel) => {
                    let h = load_histogram(cfg, rel, CountSource::Histogram, out)?;
                    let cl = make_threshold_classifier(&fit_poisson_mixture(&h)?)?;
                    extra.insert("fidelity_minus".into(), cl.fidelity_minus.into());
                    extra.insert("fidelity_zero".into(), cl.fidelity_zero.into());
                    cl
                }
            };
            extra.insert("threshold".into(), cl.threshold.into());
            let mut obs = Vec::new();
            for entry in files {
                let (path, bytes) = read_input(cfg, &entry.file, out)?;
                let shots = read_shots_csv(&bytes[..]).map_err(|e| CliError::input(&path, e))?;
                obs.extend(FlipCounts::tally(&shots, &cl).observations(entry.duration_ms));
            }
            obs
        }
    };
    let fit = fit_flip_curve(&obs)?;
    if let serde_json::Value::Object(m) = flip_extra(&fit) {
        extra.extend(m);
    }
    let t_max = obs.iter().map(|o| o.duration).fold(0.0, f64::max) * 1.2;
    Ok(Fitted {
        report: FitReport::from(&fit),
        extra: serde_json::Value::Object(extra),
        fit_csv: c.plot_data.then(|| flip_fit_rows(&obs, &fit.rates)),
        curve_csv: c.plot_data.then(|| flip_curve_rows(t_max, &fit.rates)),
    })
}

#[derive(Debug, Deserialize)]
struct RateRow {
    power_uw: f64,
    rate: f64,
    sigma: Option<f64>,
}

#[derive(Serialize)]
struct XyFitRow {
    x: f64,
    y: f64,
    sigma: Option<f64>,
    fitted: f64,
}

#[derive(Serialize)]
struct CurveRow {
    x: f64,
    fitted: f64,
}

/// Data-vs-model rows and a dense curve for a scalar model `f`.
pub fn xy_plot_data(
    x_name: &str,
    y_name: &str,
    xs: &[f64],
    ys: &[f64],
    sigmas: Option<&[f64]>,
    curve_x: &[f64],
    f: impl Fn(f64) -> f64,
) -> (Vec<u8>, Vec<u8>) {
    let rows: Vec<XyFitRow> = (0..xs.len())
        .map(|i| XyFitRow { x: xs[i], y: ys[i], sigma: sigmas.map(|s| s[i]), fitted: f(xs[i]) })
        .collect();
    let curve: Vec<CurveRow> = curve_x.iter().map(|&x| CurveRow { x, fitted: f(x) }).collect();
    (rename_header(write_rows(&rows), &[x_name, y_name]), rename_header(write_rows(&curve), &[x_name]))
}

/// Replaces the leading generic column names of a CSV header.
fn rename_header(bytes: Vec<u8>, names: &[&str]) -> Vec<u8> {
    let text = String::from_utf8(bytes).expect("UTF-8 CSV");
    let (header, body) = text.split_once('\n').expect("header line");
    let mut cols: Vec<&str> = header.split(',').collect();
    for (c, n) in cols.iter_mut().zip(names) {
        *c = n;
    }
    format!("{}\n{body}", cols.join(",")).into_bytes()
}

fn sigma_column<'a>(path: &Path, sigmas: &'a [Option<f64>], weighted: bool) -> Result<Option<Vec<f64>>> {
    if !weighted || sigmas.iter().all(Option::is_none) {
        return Ok(None);
    }
    sigmas
        .iter()
        .map(|s| s.filter(|v| *v > 0.0).ok_or_else(|| CliError::input(path, "sigma column must be positive in every row")))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

pub fn power_law_fn(fit: &PowerLawFit<f64>) -> impl Fn(f64) -> f64 + '_ {
    move |p| fit.rate.linear * p + fit.rate.quadratic * p * p
}

fn rate_power(cfg: &Loaded<RatePowerFitConfig>, out: &mut OutputDir) -> Result<Fitted> {
    let c = &cfg.config;
    let (path, bytes) = read_input(cfg, &c.input, out)?;
    let rows: Vec<RateRow> = read_rows(&bytes, &path)?;
    let p: Vec<f64> = rows.iter().map(|r| r.power_uw).collect();
    let r: Vec<f64> = rows.iter().map(|r| r.rate).collect();
    let s = sigma_column(&path, &rows.iter().map(|r| r.sigma).collect::<Vec<_>>(), c.weighted)?;
    let fit = match c.model {
        RateModel::General => fit_rate_vs_power(&p, &r, s.as_deref())?,
        RateModel::Quadratic => fit_quadratic_rate(&p, &r, s.as_deref())?,
    };
    let p_max = p.iter().cloned().fold(0.0, f64::max) * 1.1;
    let (fit_csv, curve_csv) = xy_plot_data("power_uw", "rate", &p, &r, s.as_deref(), &grid(0.0, p_max, 101), power_law_fn(&fit));
    let extra = serde_json::json!({
        "model": c.model,
        "weighted": s.is_some(),
        "linear_sigma": fit.covariance[0].max(0.0).sqrt(),
        "quadratic_sigma": fit.covariance[3].max(0.0).sqrt(),
    });
    Ok(Fitted {
        report: FitReport::from(&fit),
        extra,
        fit_csv: c.plot_data.then_some(fit_csv),
        curve_csv: c.plot_data.then_some(curve_csv),
    })
}

#[derive(Debug, Deserialize)]
struct SaturationRow {
    power_uw: f64,
    fluorescence: f64,
}

pub fn saturation_fn(fit: &SaturationFit<f64>) -> impl Fn(f64) -> f64 + '_ {
    move |p| fit.f_s * p / (p + fit.i_s)
}

fn saturation(cfg: &Loaded<SaturationFitConfig>, out: &mut OutputDir) -> Result<Fitted> {
    let c = &cfg.config;
    let (path, bytes) = read_input(cfg, &c.input, out)?;
    let rows: Vec<SaturationRow> = read_rows(&bytes, &path)?;
    let p: Vec<f64> = rows.iter().map(|r| r.power_uw).collect();
    let f: Vec<f64> = rows.iter().map(|r| r.fluorescence).collect();
    let fit = fit_saturation(&p, &f)?;
    if !fit.saturating {
        out.warn("data show no saturation; I_S is unconstrained");
    }
    let p_max = p.iter().cloned().fold(0.0, f64::max) * 1.1;
    let (fit_csv, curve_csv) = xy_plot_data("power_uw", "fluorescence", &p, &f, None, &grid(0.0, p_max, 101), saturation_fn(&fit));
    let extra = serde_json::json!({
        "F_S_sigma": fit.covariance[0].max(0.0).sqrt(),
        "I_S_sigma": fit.covariance[3].max(0.0).sqrt(),
    });
    Ok(Fitted {
        report: FitReport::from(&fit),
        extra,
        fit_csv: c.plot_data.then_some(fit_csv),
        curve_csv: c.plot_data.then_some(curve_csv),
    })
}

#[derive(Debug, Deserialize)]
struct EnergyRow {
    wavelength_nm: f64,
    rate: f64,
    sigma: Option<f64>,
}

#[derive(Serialize)]
struct EnergyFitRow {
    wavelength_nm: f64,
    energy_ev: f64,
    rate: f64,
    sigma: Option<f64>,
    fitted: f64,
    used: bool,
}

#[derive(Serialize)]
struct EnergyCurveRow {
    energy_ev: f64,
    wavelength_nm: f64,
    fitted: f64,
}

pub fn energy_options(branch: EnergyBranch) -> EnergyFitOptions<f64> {
    match branch {
        EnergyBranch::Ionization => EnergyFitOptions::ionization(),
        EnergyBranch::Recombination { sigma_ev } => EnergyFitOptions::recombination(sigma_ev),
        EnergyBranch::Unrestricted => EnergyFitOptions::unrestricted(),
    }
}

/// Data-vs-model rows and a dense curve for an energy fit.
pub fn energy_plot_data(
    nm: &[f64],
    rates: &[f64],
    sigmas: Option<&[f64]>,
    fit: &EnergyFit<f64>,
    opts: &EnergyFitOptions<f64>,
) -> (Vec<u8>, Vec<u8>) {
    let hw: Vec<f64> = nm.iter().map(|&l| nvpd::HC_EV_NM / l).collect();
    let rows: Vec<EnergyFitRow> = (0..nm.len())
        .map(|i| EnergyFitRow {
            wavelength_nm: nm[i],
            energy_ev: hw[i],
            rate: rates[i],
            sigma: sigmas.map(|s| s[i]),
            fitted: energy_model_rate(&fit.params, PhotonEnergy::new(hw[i]).expect("positive energy")),
            used: opts.max_energy.is_none_or(|m| hw[i] <= m),
        })
        .collect();
    let lo = hw.iter().cloned().fold(f64::INFINITY, f64::min).min(fit.params.e0) - 0.1;
    let hi = hw.iter().cloned().fold(0.0, f64::max) + 0.05;
    let curve: Vec<EnergyCurveRow> = grid(lo.max(0.1), hi, 201)
        .into_iter()
        .map(|e| EnergyCurveRow {
            energy_ev: e,
            wavelength_nm: nvpd::HC_EV_NM / e,
            fitted: energy_model_rate(&fit.params, PhotonEnergy::new(e).expect("positive energy")),
        })
        .collect();
    (write_rows(&rows), write_rows(&curve))
}

fn energy(cfg: &Loaded<EnergyFitConfig>, out: &mut OutputDir) -> Result<Fitted> {
    let c = &cfg.config;
    let (path, bytes) = read_input(cfg, &c.input, out)?;
    let rows: Vec<EnergyRow> = read_rows(&bytes, &path)?;
    let nm: Vec<f64> = rows.iter().map(|r| r.wavelength_nm).collect();
    let rates: Vec<f64> = rows.iter().map(|r| r.rate).collect();
    let hw = nm
        .iter()
        .map(|&l| Wavelength::new(l).map(Wavelength::to_energy))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CliError::input(&path, e))?;
    let s = sigma_column(&path, &rows.iter().map(|r| r.sigma).collect::<Vec<_>>(), c.weighted)?;
    let opts = energy_options(c.branch);
    let fit = fit_ionization_energy(&hw, &rates, s.as_deref(), &opts)?;
    if fit.extrapolated {
        out.warn("fitted E0 lies outside the sampled photon-energy window; the band edge is extrapolated");
    }
    let (fit_csv, curve_csv) = energy_plot_data(&nm, &rates, s.as_deref(), &fit, &opts);
    let extra = serde_json::json!({
        "branch": c.branch,
        "weighted": s.is_some(),
        "E0_ev": fit.params.e0,
        "E0_sigma_ev": fit.e0_sigma(),
        "sigma_ev": fit.params.sigma,
        "points_used": fit.points_used,
    });
    Ok(Fitted {
        report: FitReport::from(&fit),
        extra,
        fit_csv: c.plot_data.then_some(fit_csv),
        curve_csv: c.plot_data.then_some(curve_csv),
    })
}

//! Uniform JSON-serialisable summary of any fit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::curves::{FlipCurveFit, PowerLawFit, SaturationFit};
use super::energy::EnergyFit;
use super::hmm::HmmEstimate;
use super::mixture::PoissonMixture;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub parameter_names: Vec<String>,
    pub parameters: Vec<f64>,
    /// Row-major; empty for estimators without a covariance (EM fits).
    pub covariance: Vec<f64>,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Derived quantities (lifetimes, populations, flags as 0/1).
    pub derived: BTreeMap<String, f64>,
}

fn f<T: Scalar>(v: T) -> f64 {
    v.to_f64_lossy()
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl<T: Scalar> From<&SaturationFit<T>> for FitReport {
    fn from(s: &SaturationFit<T>) -> Self {
        let mut derived = BTreeMap::new();
        derived.insert("saturating".into(), s.saturating as u8 as f64);
        FitReport {
            model: "saturation".into(),
            parameter_names: names(&["F_S", "I_S"]),
            parameters: vec![f(s.f_s), f(s.i_s)],
            covariance: s.covariance.iter().map(|v| f(*v)).collect(),
            residual: f(s.residual),
            converged: s.converged,
            iterations: s.iterations,
            derived,
        }
    }
}

impl<T: Scalar> From<&PowerLawFit<T>> for FitReport {
    fn from(p: &PowerLawFit<T>) -> Self {
        let clamped = p.rate.clamped();
        let mut derived = BTreeMap::new();
        derived.insert("a_clamped".into(), f(clamped.linear));
        derived.insert("b_clamped".into(), f(clamped.quadratic));
        FitReport {
            model: "rate-power".into(),
            parameter_names: names(&["a", "b"]),
            parameters: vec![f(p.rate.linear), f(p.rate.quadratic)],
            covariance: p.covariance.iter().map(|v| f(*v)).collect(),
            residual: f(p.residual),
            converged: true,
            iterations: 1,
            derived,
        }
    }
}

impl<T: Scalar> From<&FlipCurveFit<T>> for FitReport {
    fn from(x: &FlipCurveFit<T>) -> Self {
        let mut derived = BTreeMap::new();
        derived.insert("lambda_ion".into(), f(x.rates.ionization));
        derived.insert("lambda_rec".into(), f(x.rates.recombination));
        derived.insert("lambda_ion_sigma".into(), f(x.ionization_sigma()));
        derived.insert("lambda_rec_sigma".into(), f(x.recombination_sigma()));
        FitReport {
            model: "flip".into(),
            parameter_names: names(&["p_inf", "lambda_tot"]),
            parameters: vec![f(x.p_infinity), f(x.lambda_tot)],
            covariance: x.covariance.iter().map(|v| f(*v)).collect(),
            residual: f(x.residual),
            converged: x.converged,
            iterations: x.iterations,
            derived,
        }
    }
}

impl<T: Scalar> From<&EnergyFit<T>> for FitReport {
    fn from(e: &EnergyFit<T>) -> Self {
        let mut parameters = vec![f(e.params.amplitude), f(e.params.e0)];
        if e.parameter_names.len() == 3 {
            parameters.push(f(e.params.sigma));
        }
        let mut derived = BTreeMap::new();
        derived.insert("sigma".into(), f(e.params.sigma));
        derived.insert("E0_sigma".into(), f(e.e0_sigma()));
        derived.insert("points_used".into(), e.points_used as f64);
        derived.insert("extrapolated".into(), e.extrapolated as u8 as f64);
        FitReport {
            model: "energy".into(),
            parameter_names: e.parameter_names.clone(),
            parameters,
            covariance: e.covariance.iter().map(|v| f(*v)).collect(),
            residual: f(e.residual),
            converged: e.converged,
            iterations: e.iterations,
            derived,
        }
    }
}

impl From<&HmmEstimate> for FitReport {
    fn from(h: &HmmEstimate) -> Self {
        let mut derived = BTreeMap::new();
        derived.insert("T_minus_ms".into(), h.lifetime_minus());
        derived.insert("T_zero_ms".into(), h.lifetime_zero());
        derived.insert("raw_lambda_ion".into(), h.raw_rates.ionization);
        derived.insert("raw_lambda_rec".into(), h.raw_rates.recombination);
        if let Some(p) = h.population_minus() {
            derived.insert("P_minus".into(), p);
        }
        derived.insert("single_state".into(), h.single_state as u8 as f64);
        FitReport {
            model: "trace-hmm".into(),
            parameter_names: names(&["lambda_ion", "lambda_rec", "fl_minus", "fl_zero"]),
            parameters: vec![h.rates.ionization, h.rates.recombination, h.emission.fl_minus, h.emission.fl_zero],
            covariance: Vec::new(),
            residual: -h.log_likelihood,
            converged: h.converged,
            iterations: h.n_iterations,
            derived,
        }
    }
}

impl From<&PoissonMixture> for FitReport {
    fn from(m: &PoissonMixture) -> Self {
        let mut derived = BTreeMap::new();
        derived.insert("P_minus".into(), m.weight_minus());
        derived.insert("resolved".into(), m.resolved as u8 as f64);
        FitReport {
            model: "histogram".into(),
            parameter_names: names(&["mu_zero", "mu_minus", "amp_zero", "amp_minus"]),
            parameters: vec![m.mu_zero, m.mu_minus, m.amp_zero, m.amp_minus],
            covariance: Vec::new(),
            residual: -m.log_likelihood,
            converged: m.converged,
            iterations: m.iterations,
            derived,
        }
    }
}

//! Photoionization threshold model: a √(E − E₀) band-edge density of states
//! convolved with a Gaussian distribution of final energies,
//!
//! r(ħω) = A ∫_{E₀}^{∞} √(E − E₀) · exp(−½((E − ħω)/σ)²) dE,
//!
//! and the fit of E₀ to the one-photon (linear-in-power) rate coefficients.
//!
//! The integral is evaluated on the window [max(E₀, ħω − 8σ), ħω + 8σ]
//! after substituting E = E₀ + u², which removes the square-root endpoint
//! singularity; the Gaussian mass outside the window is below 1e-14.

use log::warn;
use serde::{Deserialize, Serialize};

use super::nls::{nls_fit, CovarianceScaling, CurveModel, NlsOptions, Observation};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::scalar::Scalar;
use crate::units::{PhotonEnergy, HC_EV_NM};

/// Half-width of the integration window in units of σ.
pub const WINDOW_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyFitParams<T> {
    /// Amplitude in rate units per √eV per eV.
    pub amplitude: T,
    /// Band-edge energy relative to the NV⁻ ground state (eV).
    pub e0: T,
    /// Width of the final-energy distribution (eV).
    pub sigma: T,
}

#[derive(Clone, Copy)]
enum Kernel {
    Value,
    DE0,
    DSigma,
}

/// ∫ 2u²·k(y) du with y = u² + E₀ − ħω, over the truncated window.
fn window_integral<T: Scalar>(e0: T, sigma: T, hw: T, kernel: Kernel) -> T {
    let w = T::lit(WINDOW_SIGMAS) * sigma;
    let hi = hw + w - e0;
    if hi <= T::zero() {
        return T::zero();
    }
    let lo = (hw - w - e0).max(T::zero());
    let s2 = sigma * sigma;
    let f = |u: T| {
        let y = u * u + e0 - hw;
        let g = (-(y * y) / (s2 + s2)).exp();
        let k = match kernel {
            Kernel::Value => g,
            Kernel::DE0 => -y / s2 * g,
            Kernel::DSigma => y * y / (s2 * sigma) * g,
        };
        T::lit(2.0) * u * u * k
    };
    let opts = QuadOptions {
        rel_tol: T::lit(1e-11).max(T::epsilon() * T::lit(64.0)),
        abs_tol: T::min_positive_value(),
        max_intervals: 4000,
    };
    let lo_u = lo.sqrt();
    let hi_u = hi.sqrt();
    // The Gaussian peak sits at u = √(ħω − E₀); split there so both halves
    // start from smooth segments.
    let peak = (hw - e0).max(T::zero()).sqrt();
    if peak > lo_u && peak < hi_u {
        integrate(f, lo_u, peak, &opts).value + integrate(f, peak, hi_u, &opts).value
    } else {
        integrate(f, lo_u, hi_u, &opts).value
    }
}

/// Leibniz terms from the window endpoints ħω ± 8σ, which move in u when E₀
/// or σ change. Returns (∂/∂E₀, ∂/∂σ) of the unscaled integral.
fn window_boundary<T: Scalar>(e0: T, sigma: T, hw: T) -> (T, T) {
    let w = T::lit(WINDOW_SIGMAS);
    let edge = (-(w * w) / T::lit(2.0)).exp();
    let hi = hw + w * sigma - e0;
    if hi <= T::zero() {
        return (T::zero(), T::zero());
    }
    let mut d_e0 = -hi.sqrt() * edge;
    let mut d_sigma = w * hi.sqrt() * edge;
    let lo = hw - w * sigma - e0;
    if lo > T::zero() {
        d_e0 = d_e0 + lo.sqrt() * edge;
        d_sigma = d_sigma + w * lo.sqrt() * edge;
    }
    (d_e0, d_sigma)
}

/// Rate predicted at photon energy `hw`.
pub fn energy_model_rate<T: Scalar>(params: &EnergyFitParams<T>, hw: PhotonEnergy<T>) -> T {
    params.amplitude * window_integral(params.e0, params.sigma, hw.ev(), Kernel::Value)
}

/// Curve model over (A, E₀, σ), or (A, E₀) when σ is held fixed.
#[derive(Debug, Clone, Copy)]
pub struct EnergyModel<T> {
    pub fixed_sigma: Option<T>,
}

impl<T: Scalar> EnergyModel<T> {
    fn unpack(&self, p: &[T]) -> (T, T, T) {
        match self.fixed_sigma {
            Some(s) => (p[0], p[1], s),
            None => (p[0], p[1], p[2]),
        }
    }
}

impl<T: Scalar> CurveModel<T> for EnergyModel<T> {
    type Input = T;

    fn name(&self) -> &'static str {
        "energy"
    }
    fn parameter_names(&self) -> Vec<&'static str> {
        match self.fixed_sigma {
            Some(_) => vec!["A", "E0"],
            None => vec!["A", "E0", "sigma"],
        }
    }
    fn value(&self, hw: &T, p: &[T]) -> T {
        let (a, e0, s) = self.unpack(p);
        a * window_integral(e0, s, *hw, Kernel::Value)
    }
    fn gradient(&self, hw: &T, p: &[T], g: &mut [T]) {
        let (a, e0, s) = self.unpack(p);
        let (edge_e0, edge_sigma) = window_boundary(e0, s, *hw);
        g[0] = window_integral(e0, s, *hw, Kernel::Value);
        g[1] = a * (window_integral(e0, s, *hw, Kernel::DE0) + edge_e0);
        if self.fixed_sigma.is_none() {
            g[2] = a * (window_integral(e0, s, *hw, Kernel::DSigma) + edge_sigma);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyFitOptions<T> {
    /// Hold σ at this value (recombination branch).
    pub fix_sigma: Option<T>,
    /// Discard points above this photon energy (eV); the √DOS form only
    /// holds near the band edge.
    pub max_energy: Option<T>,
}

impl<T: Scalar> EnergyFitOptions<T> {
    /// Ionization branch: free σ, data restricted to λ ≥ 445 nm.
    pub fn ionization() -> Self {
        Self { fix_sigma: None, max_energy: Some(T::lit(HC_EV_NM / 445.0)) }
    }

    /// Recombination branch: σ fixed to the ionization value, all points.
    pub fn recombination(sigma: T) -> Self {
        Self { fix_sigma: Some(sigma), max_energy: None }
    }

    pub fn unrestricted() -> Self {
        Self { fix_sigma: None, max_energy: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyFit<T> {
    pub params: EnergyFitParams<T>,
    /// Row-major covariance over the fitted parameters (A, E₀[, σ]).
    pub covariance: Vec<T>,
    pub parameter_names: Vec<String>,
    pub residual: T,
    pub converged: bool,
    pub iterations: usize,
    pub points_used: usize,
    /// E₀ lies outside the span of the fitted photon energies.
    pub extrapolated: bool,
}

impl<T: Scalar> EnergyFit<T> {
    pub fn e0_sigma(&self) -> T {
        let n = self.parameter_names.len();
        self.covariance[n + 1].max(T::zero()).sqrt()
    }
}

/// Fits (A, E₀, σ) to linear rate coefficients `rates` measured at photon
/// energies `hw`. `sigmas` are per-point standard errors (inverse-variance
/// weights); `None` fits unweighted.
pub fn fit_ionization_energy<T: Scalar>(
    hw: &[PhotonEnergy<T>],
    rates: &[T],
    sigmas: Option<&[T]>,
    opts: &EnergyFitOptions<T>,
) -> Result<EnergyFit<T>> {
    if hw.len() != rates.len() || sigmas.is_some_and(|s| s.len() != hw.len()) {
        return Err(Error::domain("energy fit inputs differ in length"));
    }
    let keep: Vec<usize> = (0..hw.len())
        .filter(|&i| opts.max_energy.is_none_or(|m| hw[i].ev() <= m))
        .collect();
    let need = if opts.fix_sigma.is_some() { 3 } else { 4 };
    if keep.len() < need {
        return Err(Error::InsufficientData(format!(
            "energy fit needs >= {need} points below the cutoff, got {}",
            keep.len()
        )));
    }
    if let Some(s) = opts.fix_sigma {
        if !(s > T::zero()) {
            return Err(Error::domain("fixed sigma must be > 0"));
        }
    }
    let data: Vec<Observation<T, T>> = keep
        .iter()
        .map(|&i| match sigmas {
            Some(s) => Observation::with_sigma(hw[i].ev(), rates[i], s[i]),
            None => Observation::unweighted(hw[i].ev(), rates[i]),
        })
        .collect();

    // Seed by scanning (E₀, σ) with the amplitude solved linearly.
    let e_min = data.iter().map(|o| o.x).fold(T::infinity(), T::min);
    let e_max = data.iter().map(|o| o.x).fold(T::neg_infinity(), T::max);
    let sigma_grid: Vec<T> = match opts.fix_sigma {
        Some(s) => vec![s],
        None => [0.02, 0.04, 0.07, 0.1, 0.15, 0.2].iter().map(|&v| T::lit(v)).collect(),
    };
    let mut best: Option<(T, [T; 3])> = None;
    let steps = 60;
    for &s in &sigma_grid {
        for k in 0..=steps {
            let frac = T::from_usize(k).expect("k") / T::from_usize(steps).expect("steps");
            let e0 = e_min - T::lit(0.4) + (e_max - e_min + T::lit(0.8)) * frac;
            let basis: Vec<T> = data.iter().map(|o| window_integral(e0, s, o.x, Kernel::Value)).collect();
            let num: T = data.iter().zip(&basis).map(|(o, b)| o.weight * *b * o.y).sum();
            let den: T = data.iter().zip(&basis).map(|(o, b)| o.weight * *b * *b).sum();
            if den <= T::zero() {
                continue;
            }
            let a = num / den;
            let sse: T = data
                .iter()
                .zip(&basis)
                .map(|(o, b)| {
                    let r = o.y - a * *b;
                    o.weight * r * r
                })
                .sum();
            if best.as_ref().is_none_or(|(b, _)| sse < *b) {
                best = Some((sse, [a, e0, s]));
            }
        }
    }
    let (_, seed) = best.ok_or_else(|| Error::ModelMismatch("no positive model response on the data grid".into()))?;
    let model = EnergyModel { fixed_sigma: opts.fix_sigma };
    let init: Vec<T> = match opts.fix_sigma {
        Some(_) => vec![seed[0], seed[1]],
        None => seed.to_vec(),
    };
    let nls_opts = NlsOptions {
        covariance: if sigmas.is_some() { CovarianceScaling::Absolute } else { CovarianceScaling::ResidualVariance },
        ..NlsOptions::default()
    };
    let fit = nls_fit(&model, &data, &init, &nls_opts)?;
    let (amplitude, e0, sigma) = model.unpack(&fit.params);
    if !(sigma > T::zero()) {
        return Err(Error::ModelMismatch(format!("fitted width σ = {sigma} eV is not positive")));
    }
    let extrapolated = e0 < e_min || e0 > e_max;
    if extrapolated {
        warn!("fitted E0 = {e0} eV lies outside the sampled window [{e_min}, {e_max}] eV");
    }
    Ok(EnergyFit {
        params: EnergyFitParams { amplitude, e0, sigma },
        covariance: fit.covariance,
        parameter_names: model.parameter_names().iter().map(|s| s.to_string()).collect(),
        residual: fit.residual,
        converged: fit.converged,
        iterations: fit.iterations,
        points_used: data.len(),
        extrapolated,
    })
}

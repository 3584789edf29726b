//! Saturation, power-law and flip-curve fits built on [`nls_fit`].

use log::warn;
use serde::{Deserialize, Serialize};

use super::nls::{nls_fit, CovarianceScaling, CurveModel, NlsFit, NlsOptions, Observation};
use crate::error::{Error, Result};
use crate::kinetics::{rates_from_flip_fit, PowerLawRate, TwoStateRates};
use crate::scalar::Scalar;
use crate::units::ChargeState;

/// F(I) = F_S·I/(I + I_S).
#[derive(Debug, Clone, Copy, Default)]
pub struct SaturationModel;

impl<T: Scalar> CurveModel<T> for SaturationModel {
    type Input = T;

    fn name(&self) -> &'static str {
        "saturation"
    }
    fn parameter_names(&self) -> Vec<&'static str> {
        vec!["F_S", "I_S"]
    }
    fn value(&self, i: &T, p: &[T]) -> T {
        p[0] * *i / (*i + p[1])
    }
    fn gradient(&self, i: &T, p: &[T], g: &mut [T]) {
        let d = *i + p[1];
        g[0] = *i / d;
        g[1] = -p[0] * *i / (d * d);
    }
}

/// f(p) = a·p + b·p².
#[derive(Debug, Clone, Copy, Default)]
pub struct ParabolaModel;

impl<T: Scalar> CurveModel<T> for ParabolaModel {
    type Input = T;

    fn name(&self) -> &'static str {
        "rate-power"
    }
    fn parameter_names(&self) -> Vec<&'static str> {
        vec!["a", "b"]
    }
    fn value(&self, x: &T, p: &[T]) -> T {
        p[0] * *x + p[1] * *x * *x
    }
    fn gradient(&self, x: &T, _: &[T], g: &mut [T]) {
        g[0] = *x;
        g[1] = *x * *x;
    }
}

/// Flip probabilities of both start states with shared relaxation rate:
/// q₋(t) = p∞·(1 − e^(−λt)), q₀(t) = (1 − p∞)·(1 − e^(−λt)).
/// Parameters are (p∞, λ_tot); the input is (duration, start state).
#[derive(Debug, Clone, Copy, Default)]
pub struct FlipCurveModel;

impl<T: Scalar> CurveModel<T> for FlipCurveModel {
    type Input = (T, ChargeState);

    fn name(&self) -> &'static str {
        "flip"
    }
    fn parameter_names(&self) -> Vec<&'static str> {
        vec!["p_inf", "lambda_tot"]
    }
    fn value(&self, x: &(T, ChargeState), p: &[T]) -> T {
        let relaxed = -(-p[1] * x.0).exp_m1();
        match x.1 {
            ChargeState::Negative => p[0] * relaxed,
            ChargeState::Neutral => (T::one() - p[0]) * relaxed,
        }
    }
    fn gradient(&self, x: &(T, ChargeState), p: &[T], g: &mut [T]) {
        let (t, start) = *x;
        let relaxed = -(-p[1] * t).exp_m1();
        let slope = t * (-p[1] * t).exp();
        let (sign, coef) = match start {
            ChargeState::Negative => (T::one(), p[0]),
            ChargeState::Neutral => (-T::one(), T::one() - p[0]),
        };
        g[0] = sign * relaxed;
        g[1] = coef * slope;
    }
}

/// Generic fit outcome serialisable into a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit<T> {
    pub f_s: T,
    pub i_s: T,
    /// Row-major 2×2 covariance of (F_S, I_S).
    pub covariance: [T; 4],
    pub residual: T,
    pub converged: bool,
    pub iterations: usize,
    /// False when the power grid never reaches I_S/3.
    pub saturating: bool,
}

fn ordinary_line<T: Scalar>(xs: &[T], ys: &[T]) -> Option<(T, T)> {
    let n = T::from_usize(xs.len())?;
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let sxx: T = xs.iter().map(|x| (*x - mx) * (*x - mx)).sum();
    let sxy: T = xs.iter().zip(ys).map(|(x, y)| (*x - mx) * (*y - my)).sum();
    if sxx <= T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Fits F = F_S·I/(I + I_S), seeded by the linearisation I/F = I/F_S + I_S/F_S.
pub fn fit_saturation<T: Scalar>(powers: &[T], fluorescence: &[T]) -> Result<SaturationFit<T>> {
    if powers.len() != fluorescence.len() {
        return Err(Error::domain("powers and fluorescence differ in length"));
    }
    if powers.len() < 2 {
        return Err(Error::InsufficientData("saturation fit needs >= 2 points".into()));
    }
    let positive: Vec<(T, T)> = powers
        .iter()
        .zip(fluorescence)
        .filter(|(i, f)| **i > T::zero() && **f > T::zero())
        .map(|(i, f)| (*i, *f))
        .collect();
    let f_max = fluorescence.iter().copied().fold(T::zero(), T::max);
    let i_max = powers.iter().copied().fold(T::zero(), T::max);
    let mut init = [f_max * T::lit(2.0), i_max * T::lit(0.5)];
    if positive.len() >= 2 {
        let xs: Vec<T> = positive.iter().map(|p| p.0).collect();
        let ys: Vec<T> = positive.iter().map(|p| p.0 / p.1).collect();
        if let Some((intercept, slope)) = ordinary_line(&xs, &ys) {
            if slope > T::zero() && intercept > T::zero() {
                init = [slope.recip(), intercept / slope];
            }
        }
    }
    let data: Vec<_> = powers
        .iter()
        .zip(fluorescence)
        .map(|(i, f)| Observation::unweighted(*i, *f))
        .collect();
    let fit = nls_fit(&SaturationModel, &data, &init, &NlsOptions::default())?;
    let (f_s, i_s) = (fit.params[0], fit.params[1]);
    if !(f_s > T::zero() && i_s > T::zero()) {
        return Err(Error::ModelMismatch(format!("saturation fit gave F_S = {f_s}, I_S = {i_s}")));
    }
    let saturating = i_max > i_s / T::lit(3.0);
    if !saturating {
        warn!("power grid (max {i_max} µW) never approaches saturation (I_S = {i_s} µW); covariance is wide");
    }
    Ok(SaturationFit {
        f_s,
        i_s,
        covariance: [fit.cov(0, 0), fit.cov(0, 1), fit.cov(1, 0), fit.cov(1, 1)],
        residual: fit.residual,
        converged: fit.converged,
        iterations: fit.iterations,
        saturating,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit<T> {
    /// Raw fitted coefficients (may be slightly negative from noise).
    pub rate: PowerLawRate<T>,
    pub covariance: [T; 4],
    pub residual: T,
}

/// Least-squares f(p) = a·p + b·p². `sigmas`, when given, are per-point
/// standard errors used as inverse-variance weights.
pub fn fit_rate_vs_power<T: Scalar>(powers: &[T], rates: &[T], sigmas: Option<&[T]>) -> Result<PowerLawFit<T>> {
    if powers.len() != rates.len() || sigmas.is_some_and(|s| s.len() != powers.len()) {
        return Err(Error::domain("rate-power inputs differ in length"));
    }
    if powers.len() < 3 {
        return Err(Error::InsufficientData("rate-power fit needs >= 3 points".into()));
    }
    let data: Vec<_> = (0..powers.len())
        .map(|i| match sigmas {
            Some(s) => Observation::with_sigma(powers[i], rates[i], s[i]),
            None => Observation::unweighted(powers[i], rates[i]),
        })
        .collect();
    let opts = NlsOptions {
        covariance: if sigmas.is_some() { CovarianceScaling::Absolute } else { CovarianceScaling::ResidualVariance },
        ..NlsOptions::default()
    };
    let fit = nls_fit(&ParabolaModel, &data, &[T::zero(), T::zero()], &opts)?;
    Ok(PowerLawFit {
        rate: PowerLawRate::new(fit.params[0], fit.params[1]),
        covariance: [fit.cov(0, 0), fit.cov(0, 1), fit.cov(1, 0), fit.cov(1, 1)],
        residual: fit.residual,
    })
}

/// Weighted least squares for the pure two-photon law f(p) = b·p².
pub fn fit_quadratic_rate<T: Scalar>(powers: &[T], rates: &[T], sigmas: Option<&[T]>) -> Result<PowerLawFit<T>> {
    if powers.len() != rates.len() || sigmas.is_some_and(|s| s.len() != powers.len()) {
        return Err(Error::domain("rate-power inputs differ in length"));
    }
    if powers.len() < 2 {
        return Err(Error::InsufficientData("quadratic rate fit needs >= 2 points".into()));
    }
    let weight = |i: usize| match sigmas {
        Some(s) => (s[i] * s[i]).recip(),
        None => T::one(),
    };
    if sigmas.is_some_and(|s| s.iter().any(|v| !(*v > T::zero()))) {
        return Err(Error::domain("sigmas must be > 0"));
    }
    let (mut num, mut den) = (T::zero(), T::zero());
    for i in 0..powers.len() {
        let x = powers[i] * powers[i];
        num = num + weight(i) * x * rates[i];
        den = den + weight(i) * x * x;
    }
    if !(den > T::zero()) {
        return Err(Error::RankDeficient("all powers are zero".into()));
    }
    let b = num / den;
    let residual: T = (0..powers.len())
        .map(|i| {
            let r = rates[i] - b * powers[i] * powers[i];
            weight(i) * r * r
        })
        .sum();
    let var = match sigmas {
        Some(_) => den.recip(),
        None => residual / T::from_usize(powers.len() - 1).expect("count") / den,
    };
    Ok(PowerLawFit {
        rate: PowerLawRate::quadratic_only(b),
        covariance: [T::zero(), T::zero(), T::zero(), var],
        residual,
    })
}

/// A measured flip probability with its standard uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipObservation<T> {
    pub duration: T,
    pub initial: ChargeState,
    pub probability: T,
    pub sigma: T,
}

impl<T: Scalar> FlipObservation<T> {
    /// From `flips` out of `trials`; σ is the half-width of the 68 % Wilson
    /// score interval, which stays positive at 0 and `trials` flips.
    pub fn from_counts(duration: T, initial: ChargeState, flips: u64, trials: u64) -> Result<Self> {
        if trials == 0 || flips > trials {
            return Err(Error::domain(format!("invalid binomial counts {flips}/{trials}")));
        }
        let n = T::from_u64(trials).expect("count");
        let k = T::from_u64(flips).expect("count");
        let z2 = T::one();
        let half = (k * (n - k) / n + z2 / T::lit(4.0)).sqrt() / (n + z2);
        Ok(Self { duration, initial, probability: k / n, sigma: half })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipCurveFit<T> {
    pub rates: TwoStateRates<T>,
    /// Long-time flip probability from NV⁻, λ₋₀/λ_tot.
    pub p_infinity: T,
    pub lambda_tot: T,
    /// Covariance of (p∞, λ_tot).
    pub covariance: [T; 4],
    /// Covariance of (λ₋₀, λ₀₋), propagated linearly.
    pub rate_covariance: [T; 4],
    pub residual: T,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Scalar> FlipCurveFit<T> {
    pub fn ionization_sigma(&self) -> T {
        self.rate_covariance[0].max(T::zero()).sqrt()
    }
    pub fn recombination_sigma(&self) -> T {
        self.rate_covariance[3].max(T::zero()).sqrt()
    }
}

fn median<T: Scalar>(mut v: Vec<T>) -> Option<T> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Some(v[v.len() / 2])
}

/// Joint fit of the flip curves from NV⁻ and NV⁰ starts (either may be
/// absent) to the closed-form two-state relaxation.
pub fn fit_flip_curve<T: Scalar>(obs: &[FlipObservation<T>]) -> Result<FlipCurveFit<T>> {
    let mut durations: Vec<T> = obs.iter().map(|o| o.duration).collect();
    durations.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    durations.dedup();
    if durations.len() < 4 {
        return Err(Error::InsufficientData("flip fit needs >= 4 distinct durations".into()));
    }
    if obs.iter().any(|o| !(o.sigma > T::zero()) || o.duration < T::zero()) {
        return Err(Error::domain("flip observations need sigma > 0 and duration >= 0"));
    }

    // Seed: asymptotes from the longest duration, relaxation rate from the
    // median of −ln(1 − q/q∞)/t over unsaturated points.
    let t_max = *durations.last().expect("non-empty");
    let last = |s: ChargeState| {
        obs.iter()
            .filter(|o| o.initial == s && o.duration == t_max)
            .map(|o| o.probability)
            .next()
    };
    let p_inf0 = match (last(ChargeState::Negative), last(ChargeState::Neutral)) {
        (Some(a), Some(b)) if a + b > T::zero() => a / (a + b),
        (Some(a), None) => a,
        (None, Some(b)) => T::one() - b,
        _ => T::lit(0.5),
    }
    .max(T::lit(0.02))
    .min(T::lit(0.98));
    let rate_guesses: Vec<T> = obs
        .iter()
        .filter(|o| o.duration > T::zero())
        .filter_map(|o| {
            let q_inf = match o.initial {
                ChargeState::Negative => p_inf0,
                ChargeState::Neutral => T::one() - p_inf0,
            };
            let frac = o.probability / q_inf;
            (frac > T::lit(0.05) && frac < T::lit(0.9)).then(|| -(T::one() - frac).ln() / o.duration)
        })
        .collect();
    let lambda0 = median(rate_guesses).unwrap_or_else(|| median(durations.clone()).expect("non-empty").recip());

    let data: Vec<_> = obs
        .iter()
        .map(|o| Observation::with_sigma((o.duration, o.initial), o.probability, o.sigma))
        .collect();
    let opts = NlsOptions { covariance: CovarianceScaling::Absolute, ..NlsOptions::default() };
    let fit: NlsFit<T> = nls_fit(&FlipCurveModel, &data, &[p_inf0, lambda0], &opts)?;
    let (p_inf, lambda_tot) = (fit.params[0], fit.params[1]);
    if !(lambda_tot > T::zero()) {
        return Err(Error::ModelMismatch(format!(
            "flip curve is not exponentially saturating (λ_tot = {lambda_tot})"
        )));
    }
    if t_max * lambda_tot < T::one() {
        warn!("durations span less than one relaxation time (t_max·λ_tot = {})", t_max * lambda_tot);
    }
    let rates = rates_from_flip_fit(p_inf.max(T::zero()).min(T::one()), lambda_tot)?;
    // λ₋₀ = p·λ, λ₀₋ = (1 − p)·λ: J = [[λ, p], [−λ, 1 − p]].
    let j = [lambda_tot, p_inf, -lambda_tot, T::one() - p_inf];
    let c = [fit.cov(0, 0), fit.cov(0, 1), fit.cov(1, 0), fit.cov(1, 1)];
    let mut rc = [T::zero(); 4];
    for r in 0..2 {
        for s in 0..2 {
            let mut acc = T::zero();
            for a in 0..2 {
                for b in 0..2 {
                    acc = acc + j[r * 2 + a] * c[a * 2 + b] * j[s * 2 + b];
                }
            }
            rc[r * 2 + s] = acc;
        }
    }
    Ok(FlipCurveFit {
        rates,
        p_infinity: p_inf,
        lambda_tot,
        covariance: c,
        rate_covariance: rc,
        residual: fit.residual,
        converged: fit.converged,
        iterations: fit.iterations,
    })
}

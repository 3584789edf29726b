use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::units::{ChargeState, Power};

/// Ionization (NV⁻→NV⁰) and recombination (NV⁰→NV⁻) rates in ms⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStateRates<T> {
    pub ionization: T,
    pub recombination: T,
}

impl<T: Scalar> TwoStateRates<T> {
    pub fn new(ionization: T, recombination: T) -> Result<Self> {
        let ok = |v: T| v >= T::zero() && v.is_finite();
        if !ok(ionization) || !ok(recombination) {
            return Err(Error::domain(format!(
                "rates must be finite and >= 0, got ({ionization}, {recombination})"
            )));
        }
        Ok(Self { ionization, recombination })
    }

    /// Rates from mean dwell times (lifetime = 1/rate).
    pub fn from_lifetimes(t_minus: T, t_zero: T) -> Result<Self> {
        if !(t_minus > T::zero() && t_zero > T::zero()) {
            return Err(Error::domain("lifetimes must be > 0"));
        }
        Self::new(t_minus.recip(), t_zero.recip())
    }

    pub fn zero() -> Self {
        Self { ionization: T::zero(), recombination: T::zero() }
    }

    /// λ_tot = λ₋₀ + λ₀₋, the relaxation ("pumping") rate.
    pub fn total(&self) -> T {
        self.ionization + self.recombination
    }

    /// Mean NV⁻ dwell time; infinite when the ionization rate is zero.
    pub fn lifetime_minus(&self) -> T {
        self.ionization.recip()
    }

    pub fn lifetime_zero(&self) -> T {
        self.recombination.recip()
    }

    /// Rate of leaving `state`.
    pub fn exit_rate(&self, state: ChargeState) -> T {
        match state {
            ChargeState::Negative => self.ionization,
            ChargeState::Neutral => self.recombination,
        }
    }
}

/// Occupation probabilities of NV⁻ and NV⁰.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeDistribution<T> {
    pub p_minus: T,
    pub p_zero: T,
}

impl<T: Scalar> ChargeDistribution<T> {
    pub fn new(p_minus: T) -> Result<Self> {
        if !(p_minus >= T::zero() && p_minus <= T::one()) {
            return Err(Error::domain(format!("probability must lie in [0, 1], got {p_minus}")));
        }
        Ok(Self { p_minus, p_zero: T::one() - p_minus })
    }

    pub fn pure(state: ChargeState) -> Self {
        match state {
            ChargeState::Negative => Self { p_minus: T::one(), p_zero: T::zero() },
            ChargeState::Neutral => Self { p_minus: T::zero(), p_zero: T::one() },
        }
    }

    pub fn probability(&self, state: ChargeState) -> T {
        match state {
            ChargeState::Negative => self.p_minus,
            ChargeState::Neutral => self.p_zero,
        }
    }
}

/// Detailed-balance steady state, p₋ = λ₀₋/(λ₋₀+λ₀₋) = T₋/(T₋+T₀).
pub fn steady_state<T: Scalar>(r: &TwoStateRates<T>) -> Result<ChargeDistribution<T>> {
    let total = r.total();
    if total <= T::zero() {
        return Err(Error::NoSteadyState);
    }
    let p_minus = r.recombination / total;
    Ok(ChargeDistribution { p_minus, p_zero: r.ionization / total })
}

/// Exact solution of the two-state master equation after time `t` (ms).
///
/// p(t) = p(∞) + (p(0) − p(∞))·e^(−λ_tot·t). For a pure NV⁻ start this is
/// p(∞) − (λ₋₀/λ_tot)·e^(−λ_tot·t)·(−1, 1), and for a pure NV⁰ start
/// p(∞) + (λ₀₋/λ_tot)·e^(−λ_tot·t)·(−1, 1).
pub fn evolve<T: Scalar>(r: &TwoStateRates<T>, p0: &ChargeDistribution<T>, t: T) -> Result<ChargeDistribution<T>> {
    if !(t >= T::zero()) {
        return Err(Error::domain(format!("time must be >= 0 ms, got {t}")));
    }
    let total = r.total();
    if total == T::zero() || t == T::zero() {
        return Ok(*p0);
    }
    let decay = (-total * t).exp();
    let relaxed = -(-total * t).exp_m1();
    // Each component is a convex combination of its start and stationary value.
    let p_minus = p0.p_minus * decay + (r.recombination / total) * relaxed;
    let p_zero = p0.p_zero * decay + (r.ionization / total) * relaxed;
    Ok(ChargeDistribution { p_minus, p_zero })
}

/// Probability that the charge state at time `t` differs from `initial`.
pub fn flip_probability<T: Scalar>(r: &TwoStateRates<T>, initial: ChargeState, t: T) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(Error::domain(format!("time must be >= 0 ms, got {t}")));
    }
    let total = r.total();
    if total == T::zero() {
        return Ok(T::zero());
    }
    let relaxed = -(-total * t).exp_m1();
    Ok(r.exit_rate(initial) / total * relaxed)
}

/// Splits a fitted asymptote and relaxation rate into the two rates:
/// λ₋₀ = p∞·λ_tot and λ₀₋ = (1 − p∞)·λ_tot, where p∞ is the long-time flip
/// probability starting from NV⁻.
pub fn rates_from_flip_fit<T: Scalar>(p_inf_from_minus: T, lambda_tot: T) -> Result<TwoStateRates<T>> {
    if !(p_inf_from_minus >= T::zero() && p_inf_from_minus <= T::one()) {
        return Err(Error::domain(format!("asymptote must lie in [0, 1], got {p_inf_from_minus}")));
    }
    if !(lambda_tot > T::zero() && lambda_tot.is_finite()) {
        return Err(Error::domain(format!("relaxation rate must be > 0, got {lambda_tot}")));
    }
    TwoStateRates::new(p_inf_from_minus * lambda_tot, (T::one() - p_inf_from_minus) * lambda_tot)
}

/// Rate model f(p) = a·p + b·p² (ms⁻¹, p in µW). `linear` carries the
/// one-photon part, `quadratic` the two-photon part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawRate<T> {
    pub linear: T,
    pub quadratic: T,
}

impl<T: Scalar> PowerLawRate<T> {
    pub fn new(linear: T, quadratic: T) -> Self {
        Self { linear, quadratic }
    }

    pub fn quadratic_only(quadratic: T) -> Self {
        Self { linear: T::zero(), quadratic }
    }

    pub fn at(&self, p: Power<T>) -> T {
        let p = p.uw();
        self.linear * p + self.quadratic * p * p
    }

    /// Coefficients with small negative fit noise clamped to zero.
    pub fn clamped(&self) -> Self {
        Self {
            linear: self.linear.max(T::zero()),
            quadratic: self.quadratic.max(T::zero()),
        }
    }
}

/// Ionization and recombination rates at power `p`.
pub fn power_scaled_rates<T: Scalar>(
    ionization: &PowerLawRate<T>,
    recombination: &PowerLawRate<T>,
    p: Power<T>,
) -> TwoStateRates<T> {
    // Negative coefficients from noisy fits must not yield negative rates.
    TwoStateRates {
        ionization: ionization.at(p).max(T::zero()),
        recombination: recombination.at(p).max(T::zero()),
    }
}

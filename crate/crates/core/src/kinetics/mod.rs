//! Rate-equation models of the photo-induced charge dynamics.
//!
//! [`two_state`] holds the NV⁻/NV⁰ telegraph kinetics: steady state,
//! closed-form evolution, flip probabilities and power-law rate scaling.
//! [`four_level`] holds the saturation model with ground, excited and
//! metastable NV⁻ levels plus one effective NV⁰ level.

pub mod four_level;
pub mod two_state;

pub use four_level::{four_level_steady_state, saturation_curve, FourLevelParams, FourLevelState, FourLevelSteadyState};
pub use two_state::{
    evolve, flip_probability, power_scaled_rates, rates_from_flip_fit, steady_state, ChargeDistribution,
    PowerLawRate, TwoStateRates,
};

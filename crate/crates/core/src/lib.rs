//! Simulation and inference for the photo-induced charge-state dynamics of
//! a two-state emitter (NV⁻/NV⁰ in diamond).
//!
//! * [`units`]: charge states, photon energy, wavelength and power;
//! * [`kinetics`]: two-state and four-level rate equations;
//! * [`sim`]: seeded photon-counting simulations;
//! * [`inference`]: HMM, Poisson-mixture and least-squares estimators.
//!
//! Deterministic numerics are generic over [`Scalar`] (`f32`/`f64`); the
//! aliases below fix the scalar to `f64`.

pub mod error;
pub mod inference;
pub mod kinetics;
pub mod linalg;
pub mod quadrature;
pub mod scalar;
pub mod sim;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use units::{energy_to_wavelength, wavelength_to_energy, ChargeState, HC_EV_NM};

pub type PhotonEnergy = units::PhotonEnergy<f64>;
pub type Wavelength = units::Wavelength<f64>;
pub type Power = units::Power<f64>;
pub type TwoStateRates = kinetics::TwoStateRates<f64>;
pub type ChargeDistribution = kinetics::ChargeDistribution<f64>;
pub type PowerLawRate = kinetics::PowerLawRate<f64>;
pub type FourLevelParams = kinetics::FourLevelParams<f64>;
pub type FourLevelState = kinetics::FourLevelState<f64>;
pub type SaturationFit = inference::SaturationFit<f64>;
pub type PowerLawFit = inference::PowerLawFit<f64>;
pub type FlipCurveFit = inference::FlipCurveFit<f64>;
pub type FlipObservation = inference::FlipObservation<f64>;
pub type EnergyFitParams = inference::EnergyFitParams<f64>;
pub type EnergyFit = inference::EnergyFit<f64>;

pub type PhotonEnergyF32 = units::PhotonEnergy<f32>;
pub type TwoStateRatesF32 = kinetics::TwoStateRates<f32>;
pub type FourLevelParamsF32 = kinetics::FourLevelParams<f32>;
pub type EnergyFitParamsF32 = inference::EnergyFitParams<f32>;

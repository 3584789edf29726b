//! Estimators: HMM trace analysis, Poisson-mixture readout, threshold
//! classification, and the curve fits (saturation, rate vs. power, flip
//! curves, band-edge energy) sharing one least-squares engine.

pub mod classify;
pub mod curves;
pub mod energy;
pub mod hmm;
pub mod mixture;
pub mod nls;
pub mod report;

pub use classify::{make_threshold_classifier, FlipCounts, ThresholdClassifier};
pub use curves::{
    fit_flip_curve, fit_quadratic_rate, fit_rate_vs_power, fit_saturation, FlipCurveFit, FlipCurveModel, FlipObservation, ParabolaModel,
    PowerLawFit, SaturationFit, SaturationModel,
};
pub use energy::{energy_model_rate, fit_ionization_energy, EnergyFit, EnergyFitOptions, EnergyFitParams, EnergyModel};
pub use hmm::{hmm_fit, hmm_fit_with, HmmEstimate, HmmOptions, PoissonHmm};
pub use mixture::{fit_poisson_mixture, population_from_mixture, PoissonMixture};
pub use nls::{nls_fit, CovarianceScaling, CurveModel, NlsFit, NlsOptions, Observation};
pub use report::FitReport;

//! Synthetic ground truth for the figure pipelines.
//!
//! Rates follow r(λ, p) = a(λ)·p + b(λ)·p² (ms⁻¹, p in µW) and the detected
//! fluorescence is linear in power, fl(λ, p) = c(λ)·p (counts/ms).
//!
//! Anchored values:
//!
//! | quantity | value | meaning |
//! |---|---|---|
//! | b_ion(593 nm) | 1/56.6 ms⁻¹µW⁻² | NV⁻ lifetime 56.6 ms at 1 µW |
//! | b_rec(593 nm) | 1/465 ms⁻¹µW⁻² | NV⁰ lifetime 465 ms at 1 µW |
//! | c₋(593 nm), c₀(593 nm) | 2.2, 0.3 counts/ms/µW | trace fluorescence levels |
//! | E₀ ionization, recombination | 2.60 eV, 2.94 eV | band-edge energies |
//! | σ | 0.069 eV | width of the final-state distribution |
//!
//! Everything else is synthetic: the quadratic parts are sums of Gaussians
//! in wavelength (peaks 550/591 nm for ionization, 550 nm plus the 575 nm
//! NV⁰ zero-phonon line for recombination), normalised to the 593 nm
//! anchors; the linear parts are the band-edge model with amplitudes
//! [`ION_LINEAR_AMPLITUDE`] and [`REC_LINEAR_AMPLITUDE`].

use nvpd::inference::{energy_model_rate, EnergyFitParams};
use nvpd::kinetics::TwoStateRates;
use nvpd::sim::EmissionModel;
use nvpd::units::{Power, Wavelength};

pub const ANCHOR_NM: f64 = 593.0;
pub const T_MINUS_ANCHOR_MS: f64 = 56.6;
pub const T_ZERO_ANCHOR_MS: f64 = 465.0;
pub const FL_MINUS_ANCHOR: f64 = 2.2;
pub const FL_ZERO_ANCHOR: f64 = 0.3;
pub const E0_ION_EV: f64 = 2.60;
pub const E0_REC_EV: f64 = 2.94;
pub const SIGMA_EV: f64 = 0.069;
pub const BAND_GAP_EV: f64 = 5.48;
/// Amplitudes of the linear (one-photon) parts, ms⁻¹µW⁻¹ per unit of the
/// band-edge integral (eV^{3/2}).
pub const ION_LINEAR_AMPLITUDE: f64 = 0.15;
pub const REC_LINEAR_AMPLITUDE: f64 = 30.0;

/// Single-shot readout: weak 594 nm light for long enough to collect about
/// 27 counts from NV⁻ while ionizing under 1 % of shots.
pub const READOUT_NM: f64 = 594.0;
pub const READOUT_UW: f64 = 0.025;
pub const READOUT_MS: f64 = 500.0;

fn gauss(x: f64, centre: f64, width: f64) -> f64 {
    (-0.5 * ((x - centre) / width).powi(2)).exp()
}

fn ion_shape(nm: f64) -> f64 {
    0.55 * gauss(nm, 550.0, 14.0) + gauss(nm, 591.0, 12.0) + 0.04
}

fn rec_shape(nm: f64) -> f64 {
    0.4 * gauss(nm, 550.0, 14.0) + 0.3 * gauss(nm, 575.0, 3.0) + 0.03
}

fn fl_minus_shape(nm: f64) -> f64 {
    0.8 * gauss(nm, 550.0, 15.0) + gauss(nm, 589.0, 13.0) + 0.1
}

/// NV⁰ leaks into the detection band once it can be excited (below its
/// 575 nm zero-phonon line).
fn fl_zero_shape(nm: f64) -> f64 {
    1.0 + 1.5 / (1.0 + ((nm - 575.0) / 8.0).exp())
}

fn band_edge(nm: f64, e0: f64) -> f64 {
    let hw = Wavelength::new(nm).expect("positive wavelength").to_energy();
    energy_model_rate(&EnergyFitParams { amplitude: 1.0, e0, sigma: SIGMA_EV }, hw)
}

/// Quadratic ionization coefficient b_ion(λ), ms⁻¹µW⁻².
pub fn ionization_quadratic(nm: f64) -> f64 {
    ion_shape(nm) / ion_shape(ANCHOR_NM) / T_MINUS_ANCHOR_MS
}

/// Quadratic recombination coefficient b_rec(λ), ms⁻¹µW⁻².
pub fn recombination_quadratic(nm: f64) -> f64 {
    rec_shape(nm) / rec_shape(ANCHOR_NM) / T_ZERO_ANCHOR_MS
}

/// Linear ionization coefficient a_ion(λ), ms⁻¹µW⁻¹.
pub fn ionization_linear(nm: f64) -> f64 {
    ION_LINEAR_AMPLITUDE * band_edge(nm, E0_ION_EV)
}

/// Linear recombination coefficient a_rec(λ), ms⁻¹µW⁻¹.
pub fn recombination_linear(nm: f64) -> f64 {
    REC_LINEAR_AMPLITUDE * band_edge(nm, E0_REC_EV)
}

pub fn rates(nm: f64, power: Power<f64>) -> TwoStateRates<f64> {
    let p = power.uw();
    TwoStateRates {
        ionization: ionization_linear(nm) * p + ionization_quadratic(nm) * p * p,
        recombination: recombination_linear(nm) * p + recombination_quadratic(nm) * p * p,
    }
}

/// Detected fluorescence (counts/ms) of each charge state.
pub fn emission(nm: f64, power: Power<f64>, bin_width: f64) -> EmissionModel {
    let p = power.uw();
    EmissionModel {
        fl_minus: FL_MINUS_ANCHOR * fl_minus_shape(nm) / fl_minus_shape(ANCHOR_NM) * p,
        fl_zero: FL_ZERO_ANCHOR * fl_zero_shape(nm) / fl_zero_shape(ANCHOR_NM) * p,
        bin_width,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uw(p: f64) -> Power<f64> {
        Power::new(p).unwrap()
    }

    #[test]
    fn anchors_reproduce_trace_parameters() {
        let r = rates(ANCHOR_NM, uw(1.0));
        // The band-edge parts are negligible at 593 nm (2.09 eV).
        assert!((r.lifetime_minus() - 56.6).abs() < 1e-6);
        assert!((r.lifetime_zero() - 465.0).abs() < 1e-6);
        let em = emission(ANCHOR_NM, uw(1.0), 1.0);
        assert!((em.fl_minus - 2.2).abs() < 1e-12 && (em.fl_zero - 0.3).abs() < 1e-12);
    }

    #[test]
    fn emission_resolvable_across_trace_band() {
        for nm in (540..=610).step_by(5) {
            let em = emission(nm as f64, uw(1.0), 1.0);
            assert!(em.fl_minus > 1.5 * em.fl_zero, "{nm} nm: {em:?}");
        }
    }

    #[test]
    fn readout_is_single_shot() {
        let em = emission(READOUT_NM, uw(READOUT_UW), 1.0);
        let (mu_minus, mu_zero) = (em.fl_minus * READOUT_MS, em.fl_zero * READOUT_MS);
        assert!(mu_minus > 25.0 && mu_zero < 5.0, "{mu_minus} {mu_zero}");
        let r = rates(READOUT_NM, uw(READOUT_UW));
        assert!(r.ionization * READOUT_MS < 0.01);
    }

    #[test]
    fn linear_parts_switch_on_at_band_edges() {
        assert!(ionization_linear(440.0) > 10.0 * ionization_linear(520.0));
        assert!(recombination_linear(435.0) > 10.0 * recombination_linear(480.0));
    }
}

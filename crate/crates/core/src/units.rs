//! Domain quantities and unit conversions.
//!
//! Units are fixed across the crate: time in ms, rates in ms⁻¹, optical power
//! in µW, photon energy in eV, wavelength in nm and fluorescence in counts/ms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// hc in eV·nm (CODATA 2018, exact SI definition).
pub const HC_EV_NM: f64 = 1239.8419843320026;

/// Charge state of the defect. `Negative` is the bright state under
/// long-pass (>650 nm) detection; `Neutral` is dark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChargeState {
    Negative,
    Neutral,
}

impl ChargeState {
    pub fn other(self) -> Self {
        match self {
            ChargeState::Negative => ChargeState::Neutral,
            ChargeState::Neutral => ChargeState::Negative,
        }
    }

    /// Index used for two-state arrays: Negative = 0, Neutral = 1.
    pub fn index(self) -> usize {
        match self {
            ChargeState::Negative => 0,
            ChargeState::Neutral => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            ChargeState::Negative
        } else {
            ChargeState::Neutral
        }
    }

    /// Short label used in CSV files.
    pub fn label(self) -> &'static str {
        match self {
            ChargeState::Negative => "NV-",
            ChargeState::Neutral => "NV0",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "NV-" | "-" | "negative" => Some(ChargeState::Negative),
            "NV0" | "0" | "neutral" => Some(ChargeState::Neutral),
            _ => None,
        }
    }
}

/// Photon energy in eV.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PhotonEnergy<T>(T);

/// Vacuum wavelength in nm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Wavelength<T>(T);

/// Optical power in µW.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Power<T>(T);

impl<T: Scalar> PhotonEnergy<T> {
    pub fn new(ev: T) -> Result<Self> {
        if ev > T::zero() && ev.is_finite() {
            Ok(Self(ev))
        } else {
            Err(Error::domain(format!("photon energy must be > 0 eV, got {ev}")))
        }
    }

    pub fn ev(self) -> T {
        self.0
    }

    pub fn to_wavelength(self) -> Wavelength<T> {
        Wavelength(T::lit(HC_EV_NM) / self.0)
    }
}

impl<T: Scalar> Wavelength<T> {
    pub fn new(nm: T) -> Result<Self> {
        if nm > T::zero() && nm.is_finite() {
            Ok(Self(nm))
        } else {
            Err(Error::domain(format!("wavelength must be > 0 nm, got {nm}")))
        }
    }

    pub fn nm(self) -> T {
        self.0
    }

    pub fn to_energy(self) -> PhotonEnergy<T> {
        PhotonEnergy(T::lit(HC_EV_NM) / self.0)
    }
}

impl<T: Scalar> Power<T> {
    pub fn new(uw: T) -> Result<Self> {
        if uw >= T::zero() && uw.is_finite() {
            Ok(Self(uw))
        } else {
            Err(Error::domain(format!("power must be >= 0 µW, got {uw}")))
        }
    }

    pub fn uw(self) -> T {
        self.0
    }
}

/// Photon energy E = hc/λ for a wavelength in nm.
pub fn wavelength_to_energy<T: Scalar>(nm: T) -> Result<PhotonEnergy<T>> {
    Ok(Wavelength::new(nm)?.to_energy())
}

/// Wavelength λ = hc/E for an energy in eV.
pub fn energy_to_wavelength<T: Scalar>(ev: T) -> Result<Wavelength<T>> {
    Ok(PhotonEnergy::new(ev)?.to_wavelength())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hc_wavelength_is_one_ev() {
        let e = wavelength_to_energy(HC_EV_NM).unwrap();
        assert_eq!(e.ev(), 1.0);
    }

    #[test]
    fn green_laser_energy() {
        let e = wavelength_to_energy(532.0_f64).unwrap().ev();
        assert!((e - 2.330530).abs() < 1e-5, "{e}");
    }

    #[test]
    fn round_trip_477() {
        let e = wavelength_to_energy(477.0_f64).unwrap();
        assert!((e.ev() - 2.5992).abs() < 1e-4);
        let w = energy_to_wavelength(e.ev()).unwrap();
        assert!((w.nm() - 477.0).abs() / 477.0 < 1e-12);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(wavelength_to_energy(0.0_f64).is_err());
        assert!(wavelength_to_energy(-3.0_f64).is_err());
        assert!(energy_to_wavelength(f64::NAN).is_err());
        assert!(Power::new(-1e-9_f64).is_err());
        assert!(Power::new(0.0_f64).is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let e = wavelength_to_energy(532.0_f32).unwrap().ev();
        assert!((e - 2.33053).abs() < 1e-5);
    }

    #[test]
    fn charge_state_labels() {
        for s in [ChargeState::Negative, ChargeState::Neutral] {
            assert_eq!(ChargeState::from_label(s.label()), Some(s));
            assert_eq!(ChargeState::from_index(s.index()), s);
            assert_eq!(s.other().other(), s);
        }
    }

    proptest! {
        #[test]
        fn round_trip_visible(w in 400.0_f64..800.0) {
            let back = energy_to_wavelength(wavelength_to_energy(w).unwrap().ev()).unwrap().nm();
            prop_assert!(((back - w) / w).abs() < 1e-12);
        }

        #[test]
        fn strictly_decreasing(w in 400.0_f64..800.0, dw in 1e-6_f64..50.0) {
            let e1 = wavelength_to_energy(w).unwrap().ev();
            let e2 = wavelength_to_energy(w + dw).unwrap().ev();
            prop_assert!(e2 < e1);
        }
    }
}

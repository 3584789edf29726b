use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;
use crate::units::Power;

/// Cross-sections (per µW per ms) and decay rates (ms⁻¹) of the four-level
/// model: NV⁻ ground G, excited E, metastable M, and one effective NV⁰ level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourLevelParams<T> {
    /// NV⁻ absorption, G→E.
    pub sigma: T,
    /// Ionization out of E, E→NV⁰.
    pub sigma_ion: T,
    /// Effective recombination, NV⁰→G.
    pub sigma_re: T,
    pub lambda_eg: T,
    pub lambda_em: T,
    pub lambda_mg: T,
    /// NV⁰ saturation power (µW).
    pub i0: T,
}

/// Populations of G, E, M and NV⁰.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourLevelState<T> {
    pub p_g: T,
    pub p_e: T,
    pub p_m: T,
    pub p_0: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourLevelSteadyState<T> {
    pub state: FourLevelState<T>,
    /// Set when the generator has no unique stationary state (dark case);
    /// the population is then placed entirely in G by convention.
    pub degenerate: bool,
}

const G: usize = 0;
const E: usize = 1;
const M: usize = 2;
const Z: usize = 3;

impl<T: Scalar> FourLevelParams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma,
            self.sigma_ion,
            self.sigma_re,
            self.lambda_eg,
            self.lambda_em,
            self.lambda_mg,
            self.i0,
        ];
        if all.iter().any(|v| !(*v >= T::zero() && v.is_finite())) {
            return Err(Error::domain("four-level parameters must be finite and >= 0"));
        }
        if !(self.lambda_eg > T::zero()) {
            return Err(Error::domain("lambda_EG must be > 0"));
        }
        Ok(())
    }

    /// Effective recombination rate r_re = σ_re·I·I/(I + I₀).
    pub fn recombination_rate(&self, intensity: T) -> T {
        if intensity == T::zero() {
            return T::zero();
        }
        self.sigma_re * intensity * intensity / (intensity + self.i0)
    }

    /// Generator Q (row-major, dp/dt = Q·p) at the given intensity.
    pub fn generator(&self, intensity: T) -> [T; 16] {
        let exc = intensity * self.sigma;
        let ion = intensity * self.sigma_ion;
        let re = self.recombination_rate(intensity);
        let z = T::zero();
        let mut q = [z; 16];
        let mut set = |r: usize, c: usize, v: T| q[r * 4 + c] = v;
        set(G, G, -exc);
        set(G, E, self.lambda_eg);
        set(G, M, self.lambda_mg);
        set(G, Z, re);
        set(E, G, exc);
        set(E, E, -(self.lambda_eg + self.lambda_em + ion));
        set(M, E, self.lambda_em);
        set(M, M, -self.lambda_mg);
        set(Z, E, ion);
        set(Z, Z, -re);
        q
    }
}

/// Stationary populations at intensity `intensity`.
///
/// Levels unreachable from G carry zero population; the remaining block of
/// the generator is solved with one balance row replaced by normalization.
pub fn four_level_steady_state<T: Scalar>(
    fp: &FourLevelParams<T>,
    intensity: Power<T>,
) -> Result<FourLevelSteadyState<T>> {
    fp.validate()?;
    let ground_only = FourLevelSteadyState {
        state: FourLevelState { p_g: T::one(), p_e: T::zero(), p_m: T::zero(), p_0: T::zero() },
        degenerate: true,
    };
    let i = intensity.uw();
    if i == T::zero() {
        return Ok(ground_only);
    }
    let q = fp.generator(i);

    let mut reachable = [false; 4];
    reachable[G] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for from in 0..4 {
            if !reachable[from] {
                continue;
            }
            for to in 0..4 {
                if to != from && !reachable[to] && q[to * 4 + from] > T::zero() {
                    reachable[to] = true;
                    changed = true;
                }
            }
        }
    }
    let idx: Vec<usize> = (0..4).filter(|&k| reachable[k]).collect();
    let n = idx.len();
    let mut a = vec![T::zero(); n * n];
    let mut b = vec![T::zero(); n];
    for (r, &qi) in idx.iter().enumerate().take(n - 1) {
        for (c, &qj) in idx.iter().enumerate() {
            a[r * n + c] = q[qi * 4 + qj];
        }
    }
    for c in 0..n {
        a[(n - 1) * n + c] = T::one();
    }
    b[n - 1] = T::one();
    let Some(x) = linalg::solve(&a, &b, n, T::tiny()) else {
        return Ok(ground_only);
    };
    let mut p = [T::zero(); 4];
    for (k, &qi) in idx.iter().enumerate() {
        p[qi] = x[k].max(T::zero());
    }
    let total: T = p.iter().copied().sum();
    Ok(FourLevelSteadyState {
        state: FourLevelState { p_g: p[G] / total, p_e: p[E] / total, p_m: p[M] / total, p_0: p[Z] / total },
        degenerate: false,
    })
}

/// Fluorescence η·λ_EG·p_E(I) (counts/ms) over a power grid, with η the
/// detection-efficiency constant.
pub fn saturation_curve<T: Scalar>(
    fp: &FourLevelParams<T>,
    grid: &[Power<T>],
    efficiency: T,
) -> Result<Vec<(Power<T>, T)>> {
    if grid.is_empty() {
        return Err(Error::InsufficientData("empty power grid".into()));
    }
    grid.iter()
        .map(|&p| {
            let ss = four_level_steady_state(fp, p)?;
            Ok((p, efficiency * fp.lambda_eg * ss.state.p_e))
        })
        .collect()
}

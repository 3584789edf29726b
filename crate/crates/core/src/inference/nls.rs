//! Weighted nonlinear least squares by Levenberg–Marquardt iteration.
//!
//! Minimizes Σ wᵢ·(yᵢ − f(xᵢ; θ))² over θ. Each step solves
//! (JᵀWJ + μ·diag(JᵀWJ))·δ = JᵀW·r and adapts μ by factors of ten. The
//! covariance is (JᵀWJ)⁻¹ at the optimum, optionally scaled by the reduced
//! χ² when the weights are not absolute inverse variances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Parametric curve with an analytic Jacobian.
pub trait CurveModel<T: Scalar> {
    type Input;

    fn name(&self) -> &'static str;
    fn parameter_names(&self) -> Vec<&'static str>;
    fn n_params(&self) -> usize {
        self.parameter_names().len()
    }
    fn value(&self, x: &Self::Input, params: &[T]) -> T;
    /// ∂f/∂θ at `x`, written into `grad` (length `n_params`).
    fn gradient(&self, x: &Self::Input, params: &[T], grad: &mut [T]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation<X, T> {
    pub x: X,
    pub y: T,
    pub weight: T,
}

impl<X, T: Scalar> Observation<X, T> {
    pub fn unweighted(x: X, y: T) -> Self {
        Self { x, y, weight: T::one() }
    }

    /// Weight 1/σ² from a standard uncertainty.
    pub fn with_sigma(x: X, y: T, sigma: T) -> Self {
        Self { x, y, weight: (sigma * sigma).recip() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovarianceScaling {
    /// Weights are inverse variances; use (JᵀWJ)⁻¹ as is.
    Absolute,
    /// Scale (JᵀWJ)⁻¹ by SSE/(n − p).
    ResidualVariance,
}

#[derive(Debug, Clone, Copy)]
pub struct NlsOptions<T> {
    pub max_iterations: usize,
    /// Stop when every |δᵢ| ≤ tol·(|θᵢ| + tol).
    pub param_rel_tol: T,
    pub initial_damping: T,
    pub covariance: CovarianceScaling,
}

impl<T: Scalar> Default for NlsOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            param_rel_tol: T::lit(1e-10),
            initial_damping: T::lit(1e-3),
            covariance: CovarianceScaling::ResidualVariance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlsFit<T> {
    pub params: Vec<T>,
    /// Row-major `n_params × n_params`.
    pub covariance: Vec<T>,
    /// Weighted sum of squared residuals at `params`.
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
    pub n_points: usize,
}

impl<T: Scalar> NlsFit<T> {
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn std_error(&self, i: usize) -> T {
        self.covariance[i * self.n_params() + i].max(T::zero()).sqrt()
    }

    pub fn cov(&self, i: usize, j: usize) -> T {
        self.covariance[i * self.n_params() + j]
    }
}

fn weighted_sse<T: Scalar, M: CurveModel<T>>(model: &M, data: &[Observation<M::Input, T>], p: &[T]) -> T {
    data.iter()
        .map(|o| {
            let r = o.y - model.value(&o.x, p);
            o.weight * r * r
        })
        .sum()
}

/// Normal matrix JᵀWJ and gradient JᵀW·r.
fn normal_equations<T: Scalar, M: CurveModel<T>>(
    model: &M,
    data: &[Observation<M::Input, T>],
    p: &[T],
) -> (Vec<T>, Vec<T>) {
    let n = p.len();
    let mut jtj = vec![T::zero(); n * n];
    let mut jtr = vec![T::zero(); n];
    let mut g = vec![T::zero(); n];
    for o in data {
        model.gradient(&o.x, p, &mut g);
        let r = o.y - model.value(&o.x, p);
        for i in 0..n {
            jtr[i] = jtr[i] + o.weight * g[i] * r;
            for j in i..n {
                jtj[i * n + j] = jtj[i * n + j] + o.weight * g[i] * g[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            jtj[i * n + j] = jtj[j * n + i];
        }
    }
    (jtj, jtr)
}

/// Fits `model` to `data` starting from `init`.
///
/// Running out of iterations is not an error: the best parameters so far are
/// returned with `converged = false`. A Jacobian without full column rank at
/// the optimum is an error.
pub fn nls_fit<T: Scalar, M: CurveModel<T>>(
    model: &M,
    data: &[Observation<M::Input, T>],
    init: &[T],
    opts: &NlsOptions<T>,
) -> Result<NlsFit<T>> {
    let n = model.n_params();
    if init.len() != n {
        return Err(Error::domain(format!("{}: expected {n} initial parameters, got {}", model.name(), init.len())));
    }
    if data.len() < n {
        return Err(Error::InsufficientData(format!(
            "{}: {} points for {n} parameters",
            model.name(),
            data.len()
        )));
    }
    if data.iter().any(|o| !(o.weight > T::zero() && o.weight.is_finite()) || !o.y.is_finite()) {
        return Err(Error::domain(format!("{}: weights must be finite and > 0", model.name())));
    }

    let mut p = init.to_vec();
    let mut sse = weighted_sse(model, data, &p);
    if !sse.is_finite() {
        return Err(Error::domain(format!("{}: model not finite at initial parameters", model.name())));
    }
    let mut mu = opts.initial_damping;
    let mu_max = T::lit(1e20);
    let mut converged = false;
    let mut iterations = 0;
    let tol = opts.param_rel_tol;

    while iterations < opts.max_iterations && !converged {
        iterations += 1;
        if sse == T::zero() {
            converged = true;
            break;
        }
        let (jtj, jtr) = normal_equations(model, data, &p);
        let diag_floor = (0..n).fold(T::zero(), |m, i| m.max(jtj[i * n + i])) * T::tiny();
        loop {
            let mut a = jtj.clone();
            for i in 0..n {
                a[i * n + i] = a[i * n + i] + mu * jtj[i * n + i].max(diag_floor);
            }
            let step = linalg::solve(&a, &jtr, n, T::epsilon() * T::epsilon());
            let trial: Option<(Vec<T>, T, Vec<T>)> = step.and_then(|delta| {
                let cand: Vec<T> = p.iter().zip(&delta).map(|(a, b)| *a + *b).collect();
                let s = weighted_sse(model, data, &cand);
                s.is_finite().then_some((cand, s, delta))
            });
            match trial {
                Some((cand, s, delta)) if s <= sse => {
                    converged = delta
                        .iter()
                        .zip(&p)
                        .all(|(d, v)| d.abs() <= tol * (v.abs() + tol));
                    p = cand;
                    sse = s;
                    mu = (mu / T::lit(10.0)).max(T::lit(1e-12));
                    break;
                }
                _ => {
                    mu = mu * T::lit(10.0);
                    if mu > mu_max {
                        // No downhill step at any damping: numerically stationary.
                        converged = true;
                        break;
                    }
                }
            }
        }
    }

    let (jtj, _) = normal_equations(model, data, &p);
    let mut covariance = linalg::invert(&jtj, n, T::tiny()).ok_or_else(|| {
        Error::RankDeficient(format!("{}: Jacobian lacks full column rank at the optimum", model.name()))
    })?;
    if opts.covariance == CovarianceScaling::ResidualVariance {
        let dof = data.len().saturating_sub(n);
        if dof > 0 {
            let s2 = sse / T::from_usize(dof).expect("dof");
            covariance.iter_mut().for_each(|c| *c = *c * s2);
        }
    }
    Ok(NlsFit { params: p, covariance, residual: sse, iterations, converged, n_points: data.len() })
}

/// Central finite-difference gradient with step `rel_step·max(|θᵢ|, 1)`.
pub fn finite_difference_gradient<T: Scalar, M: CurveModel<T>>(model: &M, x: &M::Input, params: &[T], rel_step: T) -> Vec<T> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let h = rel_step * params[i].abs().max(T::one());
            p[i] = params[i] + h;
            let up = model.value(x, &p);
            p[i] = params[i] - h;
            let down = model.value(x, &p);
            p[i] = params[i];
            (up - down) / (h + h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line;
    impl CurveModel<f64> for Line {
        type Input = f64;
        fn name(&self) -> &'static str {
            "line"
        }
        fn parameter_names(&self) -> Vec<&'static str> {
            vec!["intercept", "slope"]
        }
        fn value(&self, x: &f64, p: &[f64]) -> f64 {
            p[0] + p[1] * x
        }
        fn gradient(&self, x: &f64, _: &[f64], g: &mut [f64]) {
            g[0] = 1.0;
            g[1] = *x;
        }
    }

    struct Decay;
    impl CurveModel<f64> for Decay {
        type Input = f64;
        fn name(&self) -> &'static str {
            "decay"
        }
        fn parameter_names(&self) -> Vec<&'static str> {
            vec!["amplitude", "rate"]
        }
        fn value(&self, x: &f64, p: &[f64]) -> f64 {
            p[0] * (-p[1] * x).exp()
        }
        fn gradient(&self, x: &f64, p: &[f64], g: &mut [f64]) {
            g[0] = (-p[1] * x).exp();
            g[1] = -p[0] * x * g[0];
        }
    }

    #[test]
    fn exact_linear_data() {
        let data: Vec<_> = (0..6).map(|i| Observation::unweighted(i as f64, 1.5 - 0.25 * i as f64)).collect();
        let fit = nls_fit(&Line, &data, &[0.0, 0.0], &NlsOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.params[0] - 1.5).abs() < 1e-12 && (fit.params[1] + 0.25).abs() < 1e-12);
        assert!(fit.residual < 1e-24);
    }

    #[test]
    fn exponential_from_poor_start() {
        let data: Vec<_> = (0..20)
            .map(|i| {
                let x = i as f64 * 0.3;
                Observation::unweighted(x, 4.0 * (-0.7 * x).exp())
            })
            .collect();
        let fit = nls_fit(&Decay, &data, &[1.0, 3.0], &NlsOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.params[0] - 4.0).abs() < 1e-9 && (fit.params[1] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn rank_deficient_design() {
        // All points at the same x: intercept and slope are not separable.
        let data: Vec<_> = (0..4).map(|i| Observation::unweighted(2.0, i as f64)).collect();
        let err = nls_fit(&Line, &data, &[0.0, 0.0], &NlsOptions::default()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(_)));
    }

    #[test]
    fn iteration_cap_flags_result() {
        let data: Vec<_> = (0..20)
            .map(|i| Observation::unweighted(i as f64 * 0.3, 4.0 * (-0.7 * i as f64 * 0.3).exp()))
            .collect();
        let opts = NlsOptions { max_iterations: 1, ..Default::default() };
        let fit = nls_fit(&Decay, &data, &[1.0, 3.0], &opts).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn input_validation() {
        let one = vec![Observation::unweighted(0.0, 1.0)];
        assert!(matches!(nls_fit(&Line, &one, &[0.0, 0.0], &NlsOptions::default()), Err(Error::InsufficientData(_))));
        let bad_w = vec![Observation { x: 0.0, y: 1.0, weight: 0.0 }, Observation::unweighted(1.0, 2.0)];
        assert!(nls_fit(&Line, &bad_w, &[0.0, 0.0], &NlsOptions::default()).is_err());
        assert!(nls_fit(&Line, &bad_w, &[0.0], &NlsOptions::default()).is_err());
    }

    #[test]
    fn absolute_covariance_for_weighted_line() {
        // With σ = 0.1 on every point, Var(slope) = σ²/Σ(x − x̄)².
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let data: Vec<_> = xs.iter().map(|&x| Observation::with_sigma(x, 2.0 * x, 0.1)).collect();
        let opts = NlsOptions { covariance: CovarianceScaling::Absolute, ..Default::default() };
        let fit = nls_fit(&Line, &data, &[0.0, 0.0], &opts).unwrap();
        assert!((fit.cov(1, 1) - 0.01 / 10.0).abs() < 1e-15);
    }
}

//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use crate::scalar::Scalar;

// Kronrod abscissae (non-negative half) and weights, QUADPACK qk15.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_intervals: usize,
}

impl<T: Scalar> Default for QuadOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10),
            abs_tol: T::zero(),
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub intervals: usize,
    pub converged: bool,
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn gk15<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Segment<T> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let h = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + T::lit(WGK[j]) * pair;
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Integrates `f` over `[a, b]` by bisecting the segment with the largest
/// error estimate until `error <= max(abs_tol, rel_tol·|value|)`.
pub fn integrate<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, opts: &QuadOptions<T>) -> QuadResult<T> {
    if a == b {
        return QuadResult {
            value: T::zero(),
            error: T::zero(),
            intervals: 0,
            converged: true,
        };
    }
    let (lo, hi, sign) = if a < b { (a, b, T::one()) } else { (b, a, -T::one()) };
    let mut segments = vec![gk15(&f, lo, hi)];
    loop {
        let value: T = segments.iter().map(|s| s.value).sum();
        let error: T = segments.iter().map(|s| s.error).sum();
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target || segments.len() >= opts.max_intervals {
            return QuadResult {
                value: sign * value,
                error,
                intervals: segments.len(),
                converged: error <= target,
            };
        }
        let worst = segments
            .iter()
            .enumerate()
            .fold((0, -T::one()), |best, (i, s)| if s.error > best.1 { (i, s.error) } else { best })
            .0;
        let seg = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            // Segment can no longer be split in this precision.
            return QuadResult {
                value: sign * (value),
                error,
                intervals: segments.len() + 1,
                converged: false,
            };
        }
        segments.push(gk15(&f, seg.a, mid));
        segments.push(gk15(&f, mid, seg.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| 3.0 * x * x - 2.0 * x + 1.0, -1.0, 2.0, &QuadOptions::default());
        assert!((r.value - 9.0).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn gaussian_mass() {
        let r = integrate(|x: f64| (-0.5 * x * x).exp(), -12.0, 12.0, &QuadOptions::default());
        assert!((r.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let opts = QuadOptions { rel_tol: 1e-10, ..Default::default() };
        let r = integrate(|x: f64| x.sqrt(), 0.0, 1.0, &opts);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let r = integrate(|x: f64| x.exp(), 1.0, 0.0, &QuadOptions::default());
        assert!((r.value + (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn single_precision() {
        let opts = QuadOptions { rel_tol: 1e-5_f32, ..Default::default() };
        let r = integrate(|x: f32| x.sin(), 0.0, std::f32::consts::PI, &opts);
        assert!((r.value - 2.0).abs() < 1e-5);
    }
}

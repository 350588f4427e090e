//! Globally adaptive 7/15-point Gauss–Kronrod quadrature.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
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

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-12, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = fc.abs() * WGK[7];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let (f1, f2) = (f(center - dx), f(center + dx));
        kron += w * (f1 + f2);
        abs += w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Panel { a, b, value: kron * half, error: ((kron - gauss) * half).abs(), abs: abs * half.abs() }
}

/// Integrates `f` over `[a, b]`.
///
/// Converges once the summed error estimate drops below
/// `max(abs_tol, rel_tol |I|)`, floored at the roundoff level of `∫|f|`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, intervals: 0 });
    }
    let first = kronrod(&f, a, b);
    if !first.value.is_finite() {
        return Err(Error::NumericalFailure(format!("non-finite integrand on [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    let (mut value, mut error, mut abs) = (first.value, first.error, first.abs);
    heap.push(first);

    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs()).max(50.0 * f64::EPSILON * abs);
        if error <= tol {
            return Ok(QuadResult { value, error, intervals: heap.len() });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::NumericalFailure(format!(
                "quadrature on [{a}, {b}] did not converge: error {error:.3e} > tolerance {tol:.3e}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            return Err(Error::NumericalFailure("quadrature interval underflow".into()));
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        abs += left.abs + right.abs - worst.abs;
        if !value.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite integrand on [{a}, {b}]")));
        }
        heap.push(left);
        heap.push(right);
        // Rebuild the running sums now and then to shed accumulated roundoff.
        if heap.len() % 256 == 0 {
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
            abs = heap.iter().map(|p| p.abs).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, &QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, 64.0 / 6.0 - 8.0, max_relative = 1e-14);
    }

    #[test]
    fn gaussian_tail() {
        let r = integrate(|x| (-x * x).exp(), 0.0, 10.0, &QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::PI.sqrt() / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn oscillatory() {
        let r = integrate(|x| (50.0 * x).cos(), 0.0, 3.0, &QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, (150.0f64).sin() / 50.0, max_relative = 1e-9);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let o = QuadOptions::default();
        let fwd = integrate(f64::sin, 0.0, 1.0, &o).unwrap().value;
        let rev = integrate(f64::sin, 1.0, 0.0, &o).unwrap().value;
        assert_relative_eq!(fwd, -rev, max_relative = 1e-14);
    }

    #[test]
    fn singular_integrand_fails() {
        let o = QuadOptions { max_intervals: 50, ..Default::default() };
        assert!(integrate(|x: f64| 1.0 / x.abs().sqrt().powi(3), -1.0, 1.0, &o).is_err());
    }
}

//! Globally adaptive 7/15-point Gauss–Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1]; odd indices are the Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
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

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Maximum number of subintervals before giving up.
pub const MAX_INTERVALS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// One 15-point Kronrod evaluation with the embedded 7-point Gauss error.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Estimate {
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

struct Piece {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// `∫_a^b f` over `pieces` equal initial subintervals, refined by bisecting the
/// worst piece until the summed error estimate meets `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    pieces: usize,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Argument(format!("integration bounds [{a}, {b}] must be finite")));
    }
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let pieces = pieces.clamp(1, MAX_INTERVALS / 2);
    let width = (b - a) / pieces as f64;
    let mut heap = BinaryHeap::with_capacity(2 * pieces);
    let (mut value, mut error) = (0.0, 0.0);
    for i in 0..pieces {
        let lo = a + i as f64 * width;
        let hi = if i + 1 == pieces { b } else { lo + width };
        let est = gk15(&f, lo, hi);
        value += est.value;
        error += est.error;
        heap.push(Piece { a: lo, b: hi, est });
    }
    while error > abs_tol.max(rel_tol * value.abs()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Validation(format!(
                "quadrature on [{a}, {b}] stalled at error {error:e}"
            )));
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval no longer splittable in floating point
            heap.push(worst);
            return Err(Error::Validation(format!(
                "quadrature on [{a}, {b}] hit the resolution limit at error {error:e}"
            )));
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        value += left.value + right.value - worst.est.value;
        error += left.error + right.error - worst.est.error;
        heap.push(Piece { a: worst.a, b: mid, est: left });
        heap.push(Piece { a: mid, b: worst.b, est: right });
    }
    // recompute to shed the rounding drift of the running sums
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.est.value, e + p.est.error));
    Ok(Estimate { value, error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        // a 15-point Kronrod rule integrates degree ≤ 22 exactly
        let e = gk15(&|x: f64| x.powi(10), -1.0, 2.0);
        assert!((e.value - (2f64.powi(11) + 1.0) / 11.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_and_oscillatory_integrals() {
        let e = integrate(f64::exp, 0.0, 1.0, 1, 1e-14, 0.0).unwrap();
        assert!((e.value - (1f64.exp() - 1.0)).abs() < 1e-14);
        let e = integrate(|x| (50.0 * x).cos(), 0.0, 10.0, 20, 1e-13, 0.0).unwrap();
        assert!((e.value - (500f64).sin() / 50.0).abs() < 1e-12);
        let e = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1, 1e-12, 0.0).unwrap();
        assert!((e.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn reversed_and_empty_ranges() {
        let e = integrate(|x| x, 1.0, 0.0, 1, 1e-14, 0.0).unwrap();
        assert!((e.value + 0.5).abs() < 1e-15);
        assert_eq!(integrate(|x| x, 3.0, 3.0, 1, 1e-14, 0.0).unwrap().value, 0.0);
        assert!(integrate(|x| x, 0.0, f64::INFINITY, 1, 1e-14, 0.0).is_err());
    }
}

//! Féjer-kernel smoothing.
//!
//! `K_λ(x) = (λ/2π) sinc²(λx/2)` is a probability density whose Fourier
//! transform is the triangle `(1 - |ξ|/λ)_+`. Convolving a bounded function with
//! it gives an entire function `f_λ` with `|f_λ^{(k)}| ≤ 2λ^k ‖f‖∞`.
//!
//! After the substitution `y = 2u/λ` every convolution becomes an integral
//! against `π⁻¹ sinc²(u) du`. Its slowly decaying tails are handled by the
//! antiderivative of `sinc²`: a cumulative table up to `u = 50π` built by
//! quadrature, and beyond that the asymptotic expansion of the tail integral.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gk15, integrate, Estimate};
use crate::spectrum::Tabulated;

/// Highest derivative order served by [`fejer_derivative`].
pub const MAX_DERIVATIVE_ORDER: usize = 6;

/// Crossover from tabulated to asymptotic `sinc²` tails.
const TAIL_SWITCH: f64 = 50.0 * PI;
const TABLE_STEP: f64 = PI / 8.0;

/// `(sin u / u)²` with the removable singularity filled in.
pub fn sinc2(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u * u / 3.0
    } else {
        let s = u.sin() / u;
        s * s
    }
}

/// `∫_u^∞ sinc²` for `u ≥ TAIL_SWITCH`, from repeated integration by parts:
/// `T(u) = 1/(2u) - ½ Re ∫_u^∞ e^{2it} t^{-2} dt` and
/// `∫_u^∞ e^{2it} t^{-p} dt = -e^{2iu}/(2i) Σ_j (p)_j (2i)^{-j} u^{-p-j}`.
fn tail_asymptotic(u: f64) -> f64 {
    let two_i = Complex64::new(0.0, 2.0);
    let mut term = Complex64::new(1.0 / (u * u), 0.0);
    let mut sum = term;
    for j in 0..60 {
        term *= (2 + j) as f64 / (two_i * u);
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    let i2 = -Complex64::from_polar(1.0, 2.0 * u) / two_i * sum;
    0.5 / u - 0.5 * i2.re
}

fn cumulative_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let cells = (TAIL_SWITCH / TABLE_STEP).round() as usize;
        let mut acc = vec![0.0; cells + 1];
        for k in 0..cells {
            let lo = k as f64 * TABLE_STEP;
            acc[k + 1] = acc[k] + gk15(&sinc2, lo, lo + TABLE_STEP).value;
        }
        acc
    })
}

/// `∫_0^∞ sinc²`, assembled numerically (its exact value is `π/2`).
pub fn sinc2_half_mass() -> f64 {
    let table = cumulative_table();
    table[table.len() - 1] + tail_asymptotic(TAIL_SWITCH)
}

/// `∫_0^u sinc²` for `0 ≤ u ≤ TAIL_SWITCH`.
fn sinc2_head(u: f64) -> f64 {
    let table = cumulative_table();
    let k = ((u / TABLE_STEP).floor() as usize).min(table.len() - 1);
    let lo = k as f64 * TABLE_STEP;
    table[k] + gk15(&sinc2, lo, u).value
}

/// `T(u) = ∫_u^∞ sinc²` for `u ≥ 0`.
pub fn sinc2_tail(u: f64) -> f64 {
    debug_assert!(u >= 0.0);
    if u >= TAIL_SWITCH {
        tail_asymptotic(u)
    } else {
        sinc2_half_mass() - sinc2_head(u)
    }
}

/// `π⁻¹ ∫_u^∞ sinc²` for any real `u`.
pub fn sinc2_upper(u: f64) -> f64 {
    if u >= 0.0 {
        sinc2_tail(u) / PI
    } else {
        (2.0 * sinc2_half_mass() - sinc2_tail(-u)) / PI
    }
}

/// Féjer kernel of bandwidth `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FejerKernel {
    lambda: f64,
}

impl FejerKernel {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Argument(format!("bandwidth must be positive, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// `K_λ(x)`.
pub fn fejer_eval(k: &FejerKernel, x: f64) -> f64 {
    k.lambda / (2.0 * PI) * sinc2(k.lambda * x / 2.0)
}

/// `K_λ^{(order)}(x) = (2π)⁻¹ ∫_{-λ}^{λ} (1 - |ξ|/λ) (iξ)^order e^{iξx} dξ`,
/// folded onto `[0, λ]` as `π⁻¹ ∫ (1 - ξ/λ) ξ^order cos(ξx + order·π/2) dξ`.
pub fn fejer_derivative(k: &FejerKernel, order: usize, x: f64) -> Result<f64> {
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::Argument(format!(
            "derivative order {order} exceeds {MAX_DERIVATIVE_ORDER}"
        )));
    }
    let lam = k.lambda;
    let shift = order as f64 * FRAC_PI_2;
    let integrand = |xi: f64| (1.0 - xi / lam) * xi.powi(order as i32) * (xi * x + shift).cos();
    let pieces = (lam * x.abs() / PI).ceil() as usize + 1;
    let scale = lam.powi(order as i32 + 1);
    let est = integrate(integrand, 0.0, lam, pieces, 1e-14 * scale, 1e-12)?;
    Ok(est.value / PI)
}

/// `λ^{order+1}/(2π) · max(1, λ|x|/3)^{-2}`, the envelope for `|K_λ^{(order)}(x)|`.
pub fn derivative_bound(k: &FejerKernel, order: usize, x: f64) -> f64 {
    let lam = k.lambda;
    let r = (lam * x.abs() / 3.0).max(1.0);
    lam.powi(order as i32 + 1) / (2.0 * PI) / (r * r)
}

/// `∫_ℝ K_λ`, by quadrature of the kernel on `|x| ≤ 100π/λ` plus the exact tail.
pub fn kernel_mass(k: &FejerKernel) -> Result<f64> {
    let lam = k.lambda;
    let edge = 2.0 * TAIL_SWITCH / lam;
    let pieces = (lam * edge / (2.0 * PI)).ceil() as usize * 4;
    let body = integrate(|x| fejer_eval(k, x), 0.0, edge, pieces, 1e-14, 1e-14)?;
    Ok(2.0 * (body.value + tail_asymptotic(TAIL_SWITCH) / PI))
}

/// A uniform output grid `start + i·step`, `i < count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl UniformGrid {
    pub fn spanning(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(Error::Argument(format!(
                "need at least two points on a nonempty interval, got {count} on [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            start: lo,
            step: (hi - lo) / (count - 1) as f64,
            count,
        })
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.start + i as f64 * self.step)
    }
}

// ∫_{lo}^{hi} sinc²(u)(α + βu) du, split into short pieces
fn weighted_piece(lo: f64, hi: f64, alpha: f64, beta: f64) -> f64 {
    let pieces = ((hi - lo) / (PI / 4.0)).ceil().max(1.0) as usize;
    let w = (hi - lo) / pieces as f64;
    let g = |u: f64| sinc2(u) * (alpha + beta * u);
    (0..pieces)
        .map(|i| {
            let a = lo + i as f64 * w;
            gk15(&g, a, if i + 1 == pieces { hi } else { a + w }).value
        })
        .sum()
}

/// `f_λ(x) = π⁻¹ ∫ f(x - 2u/λ) sinc²(u) du` for a tabulated `f`.
///
/// Node `t_i` sits at `u_i = λ(x - t_i)/2`. Between nodes `f` is linear in `u`;
/// beyond the hull it is constant and contributes its value times a tail mass.
pub fn smooth_at(f: &Tabulated, lambda: f64, x: f64) -> f64 {
    let v = &f.values;
    let last = v.len() - 1;
    let at = |i: usize| lambda * (x - f.node(i)) / 2.0;
    // u > u_0 maps to t < t_0; u < u_last maps to t > t_last
    let mut total = v[0] * sinc2_upper(at(0)) + v[last] * sinc2_upper(-at(last));
    for i in 0..last {
        let (hi, lo) = (at(i), at(i + 1));
        // f as a function of u on [lo, hi]: v_i at hi, v_{i+1} at lo
        let beta = (v[i] - v[i + 1]) / (hi - lo);
        let alpha = v[i] - beta * hi;
        total += weighted_piece(lo, hi, alpha, beta) / PI;
    }
    total
}

/// `f_λ'(x) = Σ_i slope_i · π⁻¹ ∫_{u_{i+1}}^{u_i} sinc²`.
pub fn smooth_derivative_at(f: &Tabulated, lambda: f64, x: f64) -> f64 {
    let v = &f.values;
    let at = |i: usize| lambda * (x - f.node(i)) / 2.0;
    (0..v.len() - 1)
        .map(|i| {
            let slope = (v[i + 1] - v[i]) / f.step;
            slope * (sinc2_upper(at(i + 1)) - sinc2_upper(at(i)))
        })
        .sum()
}

fn check_lambda(lambda: f64) -> Result<()> {
    FejerKernel::new(lambda).map(|_| ())
}

/// Tabulates `f_λ` on `grid`.
///
/// The result is used with linear interpolation, whose error is at most
/// `step²/8 · sup|f_λ''| ≤ step²/8 · 2λ²‖f‖`; a grid for which that exceeds
/// `tol` is rejected. Every node also spot-checks `|f_λ| ≤ 2‖f‖` and
/// `|f_λ'| ≤ 2λ‖f‖`.
pub fn smooth(f: &Tabulated, lambda: f64, grid: &UniformGrid, tol: f64) -> Result<Tabulated> {
    check_lambda(lambda)?;
    f.validate()?;
    let sup = f.sup_norm();
    let interp = grid.step * grid.step / 8.0 * 2.0 * lambda * lambda * sup;
    if interp > tol {
        return Err(Error::Validation(format!(
            "grid step {} too coarse at λ = {lambda}: interpolation error up to {interp:e} > {tol:e}",
            grid.step
        )));
    }
    let mut values = Vec::with_capacity(grid.count);
    for x in grid.points() {
        let value = smooth_at(f, lambda, x);
        let slope = smooth_derivative_at(f, lambda, x);
        let slack = 1e-9 * sup.max(1.0);
        if value.abs() > 2.0 * sup + slack || slope.abs() > 2.0 * lambda * sup + lambda * slack {
            return Err(Error::Validation(format!(
                "smoothed function breaks the derivative bound at x = {x}: ({value}, {slope})"
            )));
        }
        values.push(value);
    }
    Tabulated::new(grid.start, grid.step, values, f.lipschitz)
}

/// `max_x |f(x) - f_λ(x)|` over the grid.
pub fn sup_error(f: &Tabulated, lambda: f64, grid: &UniformGrid) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(grid
        .points()
        .map(|x| (f.eval(x) - smooth_at(f, lambda, x)).abs())
        .fold(0.0, f64::max))
}

/// `f_λ(x)` for an arbitrary bounded closure, by quadrature over `|u| ≤ cutoff`.
/// The returned error adds the quadrature estimate and the dropped tail mass
/// times `sup_f`.
pub fn smooth_fn<F: Fn(f64) -> f64>(
    f: F,
    sup_f: f64,
    lambda: f64,
    x: f64,
    cutoff: f64,
) -> Result<Estimate> {
    check_lambda(lambda)?;
    let g = |u: f64| f(x - 2.0 * u / lambda) * sinc2(u) / PI;
    let pieces = (2.0 * cutoff / (PI / 2.0)).ceil() as usize;
    let body = integrate(g, -cutoff, cutoff, pieces, 1e-13, 1e-12)?;
    Ok(Estimate {
        value: body.value,
        error: body.error + sup_f * 2.0 * sinc2_upper(cutoff),
    })
}

/// `π⁻¹ ∫ ω(2y/λ) sinc²(y) dy` for a modulus of continuity `ω` bounded by
/// `omega_sup`; bounds `‖f - f_λ‖∞` for any `f` with that modulus.
pub fn continuity_bound<W: Fn(f64) -> f64>(omega: W, omega_sup: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let reach = TAIL_SWITCH.max(lambda);
    let pieces = (reach / (PI / 4.0)).ceil() as usize;
    let body = integrate(|y| omega(2.0 * y / lambda) * sinc2(y), 0.0, reach, pieces, 1e-14, 1e-13)?;
    Ok(2.0 / PI * (body.value + omega_sup * sinc2_tail(reach)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_values() {
        for lam in [0.5, 1.0, 4.0, 16.0] {
            let k = FejerKernel::new(lam).unwrap();
            assert_eq!(fejer_eval(&k, 0.0), lam / (2.0 * PI));
            assert!(fejer_eval(&k, 2.0 * PI / lam).abs() < 1e-30);
            assert!((fejer_derivative(&k, 0, 0.0).unwrap() - lam / (2.0 * PI)).abs() < 1e-13 * lam);
        }
        assert!(FejerKernel::new(0.0).is_err());
        assert!(FejerKernel::new(-1.0).is_err());
        let k = FejerKernel::new(1.0).unwrap();
        assert!(matches!(fejer_derivative(&k, 7, 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn sinc2_mass_is_half_pi() {
        assert!((sinc2_half_mass() - FRAC_PI_2).abs() < 1e-13);
        // continuity across the tail switch
        let below = sinc2_half_mass() - sinc2_head(TAIL_SWITCH - 1e-9);
        assert!((below - tail_asymptotic(TAIL_SWITCH)).abs() < 1e-12);
        assert!((sinc2_upper(0.0) - 0.5).abs() < 1e-13);
        assert!((sinc2_upper(-1e6) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tail_against_direct_quadrature() {
        for u in [0.3, 2.0, 17.0, 140.0, 170.0, 400.0] {
            let far = 4000.0;
            let direct = integrate(sinc2, u, far, ((far - u) / 1.0) as usize, 1e-15, 1e-14)
                .unwrap()
                .value
                + tail_asymptotic(far);
            assert!((sinc2_tail(u) - direct).abs() < 1e-12, "u = {u}");
        }
    }

    #[test]
    fn kernel_mass_is_one() {
        for lam in [0.25, 1.0, 4.0, 16.0, 64.0] {
            let m = kernel_mass(&FejerKernel::new(lam).unwrap()).unwrap();
            assert!((m - 1.0).abs() < 1e-8, "λ = {lam}: {m}");
        }
    }

    #[test]
    fn first_derivative_matches_finite_difference() {
        let k = FejerKernel::new(1.0).unwrap();
        let h = 1e-4;
        for i in 0..=200 {
            let x = -10.0 + 0.1 * i as f64;
            let fd = (fejer_eval(&k, x + h) - fejer_eval(&k, x - h)) / (2.0 * h);
            let d = fejer_derivative(&k, 1, x).unwrap();
            assert!((d - fd).abs() < 1e-6, "x = {x}: {d} vs {fd}");
        }
    }

    #[test]
    fn order_zero_matches_closed_form() {
        for lam in [1.0, 4.0] {
            let k = FejerKernel::new(lam).unwrap();
            for i in 0..50 {
                let x = -7.3 + 0.31 * i as f64;
                assert!((fejer_derivative(&k, 0, x).unwrap() - fejer_eval(&k, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_bandwidth_first_derivative_bound() {
        let k = FejerKernel::new(1.0).unwrap();
        for i in 0..1000 {
            let x = -50.0 + 100.0 * i as f64 / 999.0;
            let d = fejer_derivative(&k, 1, x).unwrap().abs();
            let bound = 1.0 / (2.0 * PI) * (x.abs() / 3.0).max(1.0).powi(-2);
            assert!(d <= bound, "x = {x}");
        }
    }

    fn clipped_abs() -> Tabulated {
        Tabulated::clipped_abs(2.0, 401).unwrap()
    }

    #[test]
    fn constant_is_preserved() {
        let f = Tabulated::new(-1.0, 0.5, vec![1.0; 5], Some(0.0)).unwrap();
        let grid = UniformGrid::spanning(-3.0, 3.0, 61).unwrap();
        let s = smooth(&f, 4.0, &grid, 1.0).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-8));
        assert!(grid.points().all(|x| smooth_derivative_at(&f, 4.0, x).abs() < 1e-12));
    }

    #[test]
    fn clipped_abs_error_decreases() {
        let f = clipped_abs();
        let grid = UniformGrid::spanning(-3.0, 3.0, 241).unwrap();
        let errs: Vec<f64> = [4.0, 16.0, 64.0]
            .iter()
            .map(|&l| sup_error(&f, l, &grid).unwrap())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn smoothing_matches_direct_quadrature() {
        let f = clipped_abs();
        for &x in &[-2.5, -0.3, 0.0, 0.77, 2.0] {
            let lam = 5.0;
            let direct = smooth_fn(|y| f.eval(y), 2.0, lam, x, 4000.0).unwrap();
            let ours = smooth_at(&f, lam, x);
            assert!((ours - direct.value).abs() <= direct.error + 1e-9, "x = {x}");
        }
    }

    #[test]
    fn smoothed_derivative_matches_finite_difference() {
        let f = clipped_abs();
        let h = 1e-5;
        for &x in &[-2.2, -1.0, 0.05, 1.9] {
            let fd = (smooth_at(&f, 8.0, x + h) - smooth_at(&f, 8.0, x - h)) / (2.0 * h);
            assert!((smooth_derivative_at(&f, 8.0, x) - fd).abs() < 1e-6);
        }
    }

    // sin has Fourier support {±1}, where the kernel transform is 1 - 1/λ
    #[test]
    fn sine_attenuation_and_modulus_bound() {
        for lam in [2.0, 8.0, 32.0] {
            let omega = |a: f64| a.abs().min(2.0);
            let bound = continuity_bound(omega, 2.0, lam).unwrap();
            let mut worst = 0.0f64;
            for i in 0..25 {
                let x = -3.0 + 0.25 * i as f64;
                let est = smooth_fn(f64::sin, 1.0, lam, x, 3000.0).unwrap();
                let exact = (1.0 - 1.0 / lam) * x.sin();
                assert!((est.value - exact).abs() <= est.error + 1e-9, "λ = {lam}, x = {x}");
                worst = worst.max((x.sin() - exact).abs());
            }
            assert!(worst <= bound, "λ = {lam}: {worst} vs {bound}");
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let f = clipped_abs();
        let grid = UniformGrid::spanning(-3.0, 3.0, 7).unwrap();
        assert!(matches!(smooth(&f, 64.0, &grid, 1e-3), Err(Error::Validation(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn kernel_is_even_and_nonnegative(lam in 0.01f64..100.0, x in -1e3f64..1e3) {
            let k = FejerKernel::new(lam).unwrap();
            prop_assert!(fejer_eval(&k, x) >= 0.0);
            prop_assert_eq!(fejer_eval(&k, x), fejer_eval(&k, -x));
        }

        #[test]
        fn smoothing_contracts_sup_norm(
            vals in proptest::collection::vec(-3.0f64..3.0, 2..30),
            lam in 0.5f64..30.0,
            x in -5.0f64..5.0,
        ) {
            let f = Tabulated::new(-1.0, 2.0 / vals.len() as f64, vals, None).unwrap();
            let s = smooth_at(&f, lam, x);
            prop_assert!(s.abs() <= f.sup_norm() + 1e-10);
        }
    }
}

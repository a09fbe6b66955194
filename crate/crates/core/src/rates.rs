//! Convergence studies for Fourier interpolation and node quadrature.
//!
//! The algebraic family `f_s` on `[0, 2π)` has exactly `s - 1` continuous
//! periodic derivatives and a jump in the `s`-th, so its coefficients decay
//! like `k^{-s-1}`: `f_0` is a square wave, `f_1` a triangle wave and `f_2`
//! the periodic antiderivative of the centred triangle. All three are
//! shifted by one radian so no jump falls on a grid node.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fourier::{quad_to_nodes, EquispacedGrid, FourierInterpolant, IntegrationMatrix};

const SHIFT: f64 = 1.0;
const FINE_POINTS: usize = 1 << 14;

/// Smoothness orders with a closed-form test function.
pub const SMOOTHNESS_ORDERS: [u32; 3] = [0, 1, 2];

fn check_order(s: u32) -> Result<()> {
    if SMOOTHNESS_ORDERS.contains(&s) {
        Ok(())
    } else {
        Err(invalid(format!("no test function of smoothness {s}")))
    }
}

fn reduce(t: f64) -> f64 {
    (t - SHIFT).rem_euclid(TAU)
}

fn profile(s: u32, u: f64) -> f64 {
    match (s, u < PI) {
        (0, true) => 1.0,
        (0, false) => -1.0,
        (1, _) => (u - PI).abs(),
        (_, true) => 0.5 * PI * u - 0.5 * u * u,
        (_, false) => 0.5 * (u - PI).powi(2) - 0.5 * PI * (u - PI),
    }
}

/// Antiderivative of `profile` on `[0, 2π)` starting from zero.
fn profile_integral(s: u32, u: f64) -> f64 {
    let w = u - PI;
    match (s, u < PI) {
        (0, true) => u,
        (0, false) => TAU - u,
        (1, true) => PI * u - 0.5 * u * u,
        (1, false) => 0.5 * PI * PI + 0.5 * w * w,
        (_, true) => 0.25 * PI * u * u - u.powi(3) / 6.0,
        (_, false) => PI.powi(3) / 12.0 + w.powi(3) / 6.0 - 0.25 * PI * w * w,
    }
}

fn period_integral(s: u32) -> f64 {
    if s == 1 {
        PI * PI
    } else {
        0.0
    }
}

/// `f_s(t)`.
pub fn test_function(s: u32, t: f64) -> Result<f64> {
    check_order(s)?;
    Ok(profile(s, reduce(t)))
}

/// `∫_0^t f_s` for any real `t`.
pub fn test_function_integral(s: u32, t: f64) -> Result<f64> {
    check_order(s)?;
    let running = |v: f64| (v / TAU).floor() * period_integral(s) + profile_integral(s, v.rem_euclid(TAU));
    Ok(running(t - SHIFT) - running(-SHIFT))
}

/// `1 / (2 + cos t)`, analytic in a strip.
pub fn analytic_function(t: f64) -> f64 {
    1.0 / (2.0 + t.cos())
}

/// `∫_0^t 1 / (2 + cos)`.
pub fn analytic_integral(t: f64) -> f64 {
    let r3 = 3.0_f64.sqrt();
    let (turns, r) = ((t / TAU).floor(), t.rem_euclid(TAU));
    TAU / r3 * turns + 2.0 / r3 * (0.5 * r).sin().atan2(r3 * (0.5 * r).cos())
}

/// Largest node-quadrature error `|Θ f - ∫_0^{t_l} f|` over the grid.
fn node_quadrature_error(n: usize, f: impl Fn(f64) -> f64, exact: impl Fn(f64) -> f64) -> Result<f64> {
    let grid = EquispacedGrid::natural(n)?;
    let samples: Vec<f64> = grid.nodes().iter().map(|&t| f(t)).collect();
    let fim = IntegrationMatrix::natural(n)?;
    let q = quad_to_nodes(&fim, &samples)?;
    Ok(grid
        .nodes()
        .iter()
        .zip(&q)
        .fold(0.0_f64, |a, (&t, &v)| a.max((v - exact(t)).abs())))
}

/// Worst node-quadrature error over `cos kt` and `sin kt`, `0 ≤ k ≤ N/2 - 1`.
pub fn monomial_quadrature_error(n: usize) -> Result<f64> {
    let mut worst = node_quadrature_error(n, |_| 1.0, |t| t)?;
    for k in 1..n / 2 {
        let kf = k as f64;
        let c = node_quadrature_error(n, |t| (kf * t).cos(), |t| (kf * t).sin() / kf)?;
        let s = node_quadrature_error(n, |t| (kf * t).sin(), |t| (1.0 - (kf * t).cos()) / kf)?;
        worst = worst.max(c).max(s);
    }
    Ok(worst)
}

/// Node-quadrature error for `1 / (2 + cos t)`.
pub fn analytic_quadrature_error(n: usize) -> Result<f64> {
    node_quadrature_error(n, analytic_function, analytic_integral)
}

/// `L²(0, 2π)` interpolation error of `f_s`, sampled on a fine grid that
/// avoids the interpolation nodes.
pub fn interpolation_l2_error(s: u32, n: usize) -> Result<f64> {
    check_order(s)?;
    let grid = EquispacedGrid::natural(n)?;
    let samples: Vec<f64> = grid.nodes().iter().map(|&t| profile(s, reduce(t))).collect();
    let interp = FourierInterpolant::new(&grid, &samples)?;
    let h = TAU / FINE_POINTS as f64;
    let ts: Vec<f64> = (0..FINE_POINTS).map(|i| (i as f64 + 0.5) * h).collect();
    let vals = interp.evaluate_many(&ts);
    let sq: f64 = ts
        .iter()
        .zip(&vals)
        .map(|(&t, &v)| (profile(s, reduce(t)) - v).powi(2))
        .sum();
    Ok((sq * h).sqrt())
}

/// Node-quadrature error of `f_s`.
pub fn quadrature_error(s: u32, n: usize) -> Result<f64> {
    check_order(s)?;
    node_quadrature_error(
        n,
        |t| profile(s, reduce(t)),
        |t| test_function_integral(s, t).expect("order checked"),
    )
}

/// Least-squares slope of `log e` against `log N`.
pub fn fitted_order(sizes: &[usize], errors: &[f64]) -> Result<f64> {
    if sizes.len() != errors.len() || sizes.len() < 2 {
        return Err(invalid("need at least two (N, error) pairs of equal length"));
    }
    if errors.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(invalid("errors must be positive and finite"));
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Error sequence and fitted orders for one member of the algebraic family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraicStudy {
    pub s: u32,
    pub sizes: Vec<usize>,
    pub interpolation_errors: Vec<f64>,
    pub quadrature_errors: Vec<f64>,
    pub interpolation_order: f64,
    pub quadrature_order: f64,
    /// `-s - 1/2`.
    pub predicted_order: f64,
}

pub fn algebraic_study(s: u32, sizes: &[usize]) -> Result<AlgebraicStudy> {
    check_order(s)?;
    let interpolation_errors = sizes
        .iter()
        .map(|&n| interpolation_l2_error(s, n))
        .collect::<Result<Vec<_>>>()?;
    let quadrature_errors = sizes
        .iter()
        .map(|&n| quadrature_error(s, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(AlgebraicStudy {
        s,
        sizes: sizes.to_vec(),
        interpolation_order: fitted_order(sizes, &interpolation_errors)?,
        quadrature_order: fitted_order(sizes, &quadrature_errors)?,
        interpolation_errors,
        quadrature_errors,
        predicted_order: -(s as f64) - 0.5,
    })
}

/// Quadrature errors for `1 / (2 + cos t)` and successive ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricStudy {
    pub sizes: Vec<usize>,
    pub errors: Vec<f64>,
    pub ratios: Vec<f64>,
}

/// Runs `N = step, 2 step, …` until the error drops below `floor` or
/// `max_n` is reached.
pub fn geometric_study(step: usize, max_n: usize, floor: f64) -> Result<GeometricStudy> {
    if step == 0 || step % 2 != 0 {
        return Err(invalid("step must be a positive even integer"));
    }
    let (mut sizes, mut errors) = (Vec::new(), Vec::new());
    let mut n = step;
    while n <= max_n {
        let e = analytic_quadrature_error(n)?;
        sizes.push(n);
        errors.push(e);
        if e < floor {
            break;
        }
        n += step;
    }
    let ratios = errors.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(GeometricStudy { sizes, errors, ratios })
}

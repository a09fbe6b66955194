use std::f64::consts::TAU;

use fipsed::fourier::{full_period_integral, quad_to_nodes};
use fipsed::{EquispacedGrid, FourierInterpolant, IntegrationMatrix};
use proptest::prelude::*;

fn even_size() -> impl Strategy<Value = usize> {
    (3usize..=32).prop_map(|h| 2 * h)
}

/// Random trigonometric polynomial of degree at most `N/2 - 1`, returned
/// with its running integral.
fn trig_poly(n: usize, coeffs: &[(f64, f64)], c0: f64) -> (impl Fn(f64) -> f64 + '_, impl Fn(f64) -> f64 + '_) {
    let deg = (n / 2 - 1).min(coeffs.len());
    let f = move |t: f64| {
        c0 + coeffs[..deg]
            .iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let k = (i + 1) as f64;
                a * (k * t).cos() + b * (k * t).sin()
            })
            .sum::<f64>()
    };
    let integral = move |t: f64| {
        c0 * t
            + coeffs[..deg]
                .iter()
                .enumerate()
                .map(|(i, (a, b))| {
                    let k = (i + 1) as f64;
                    a * (k * t).sin() / k + b * (1.0 - (k * t).cos()) / k
                })
                .sum::<f64>()
    };
    (f, integral)
}

proptest! {
    #[test]
    fn quadrature_is_exact_on_trig_polynomials(
        n in even_size(),
        coeffs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 31),
        c0 in -1.0..1.0f64,
    ) {
        let (f, integral) = trig_poly(n, &coeffs, c0);
        let grid = EquispacedGrid::natural(n).unwrap();
        let samples: Vec<f64> = grid.nodes().iter().map(|&t| f(t)).collect();
        let q = quad_to_nodes(&IntegrationMatrix::natural(n).unwrap(), &samples).unwrap();
        let scale = 1.0 + samples.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for (&t, &v) in grid.nodes().iter().zip(&q) {
            prop_assert!((v - integral(t)).abs() < 1e-12 * scale * n as f64);
        }
        let interp = FourierInterpolant::new(&grid, &samples).unwrap();
        for i in 0..17 {
            let t = 0.37 * i as f64;
            prop_assert!((interp.evaluate(t) - f(t)).abs() < 1e-12 * scale * n as f64);
        }
        prop_assert!((full_period_integral(&grid, &samples).unwrap() - TAU * c0).abs() < 1e-12 * scale * n as f64);
    }

    #[test]
    fn period_scaling_is_elementwise(n in even_size(), period in 0.1..200.0f64) {
        let scaled = IntegrationMatrix::build(&EquispacedGrid::new(period, n).unwrap()).unwrap();
        let natural = IntegrationMatrix::natural(n).unwrap();
        let mu = period / TAU;
        for (a, b) in scaled.entries().iter().zip(natural.entries()) {
            prop_assert!((a - mu * b).abs() <= 1e-13 * mu.max(1.0));
        }
    }

    #[test]
    fn quadrature_is_linear(
        n in even_size(),
        u in prop::collection::vec(-10.0..10.0f64, 64),
        v in prop::collection::vec(-10.0..10.0f64, 64),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let fim = IntegrationMatrix::natural(n).unwrap();
        let (u, v) = (&u[..n], &v[..n]);
        let mix: Vec<f64> = u.iter().zip(v).map(|(x, y)| a * x + b * y).collect();
        let (qu, qv, qm) = (
            quad_to_nodes(&fim, u).unwrap(),
            quad_to_nodes(&fim, v).unwrap(),
            quad_to_nodes(&fim, &mix).unwrap(),
        );
        for i in 0..n {
            prop_assert!((qm[i] - (a * qu[i] + b * qv[i])).abs() < 1e-11);
        }
    }

    #[test]
    fn first_row_vanishes_and_row_sums_give_nodes(n in even_size()) {
        let fim = IntegrationMatrix::natural(n).unwrap();
        prop_assert!(fim.row(0).iter().all(|v| v.abs() < 1e-14));
        // the row sums integrate the constant one exactly
        for (l, &t) in EquispacedGrid::natural(n).unwrap().nodes().iter().enumerate() {
            prop_assert!((fim.row(l).iter().sum::<f64>() - t).abs() < 1e-12);
        }
    }

    #[test]
    fn resampling_a_band_limited_signal_is_lossless(
        n in even_size(),
        coeffs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 31),
    ) {
        let (f, _) = trig_poly(n, &coeffs, 0.5);
        let grid = EquispacedGrid::natural(n).unwrap();
        let samples: Vec<f64> = grid.nodes().iter().map(|&t| f(t)).collect();
        let fine = FourierInterpolant::new(&grid, &samples).unwrap().resample(2 * n).unwrap();
        for (&t, &v) in fine.grid().nodes().iter().zip(fine.values()) {
            prop_assert!((v - f(t)).abs() < 1e-12 * n as f64);
        }
    }
}

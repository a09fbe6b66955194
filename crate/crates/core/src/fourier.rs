//! Fourier interpolation and integration on equispaced periodic grids.
//!
//! A grid of `N` (even) nodes `t_j = T j / N` carries the `N/2`-degree
//! trigonometric interpolant of the samples. The Nyquist pair `k = ±N/2`
//! is always split symmetrically, half weight on each side, so real samples
//! produce a real interpolant and a real integration matrix.
//!
//! The first-order Fourier integration matrix (FIM) maps nodal samples to
//! the running integrals `∫_0^{t_l} I_N f`. Its `T = 2π` instance, the
//! natural FIM, generates every other one through `Θ^T = (T / 2π) Θ^{2π}`,
//! and is cached per `N` for the life of the process.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::{self, Write};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};

/// Largest imaginary residue tolerated when assembling a FIM before the
/// imaginary part is discarded.
pub const FIM_IMAGINARY_TOLERANCE: f64 = 1e-12;

/// `N` equispaced nodes on `[0, T)`; the right endpoint is excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct EquispacedGrid {
    period: f64,
    nodes: Vec<f64>,
}

impl EquispacedGrid {
    pub fn new(period: f64, n: usize) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(invalid(format!("period must be positive, got {period}")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(invalid(format!("grid size must be even and >= 4, got {n}")));
        }
        let nodes = (0..n).map(|j| period * j as f64 / n as f64).collect();
        Ok(Self { period, nodes })
    }

    /// The `2π`-periodic grid used by the natural FIM.
    pub fn natural(n: usize) -> Result<Self> {
        Self::new(TAU, n)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.nodes.len() as f64
    }

    /// Angular frequency `ω_k = 2πk / T`.
    pub fn omega(&self, k: i64) -> f64 {
        TAU * k as f64 / self.period
    }
}

/// Trigonometric interpolant of real samples on an [`EquispacedGrid`].
#[derive(Debug, Clone)]
pub struct FourierInterpolant {
    grid: EquispacedGrid,
    values: Vec<f64>,
    /// `f̃_k` for `k = -N/2 ..= N/2`, stored at index `k + N/2`.
    coefficients: Vec<Complex64>,
}

impl FourierInterpolant {
    pub fn new(grid: &EquispacedGrid, samples: &[f64]) -> Result<Self> {
        let n = grid.len();
        if samples.len() != n {
            return Err(invalid(format!("expected {n} samples, got {}", samples.len())));
        }
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("sample {j} is not finite")));
        }

        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let half = (n / 2) as i64;
        let coefficients = (-half..=half)
            .map(|k| buf[k.rem_euclid(n as i64) as usize] * scale)
            .collect();

        Ok(Self {
            grid: grid.clone(),
            values: samples.to_vec(),
            coefficients,
        })
    }

    pub fn grid(&self) -> &EquispacedGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn period(&self) -> f64 {
        self.grid.period
    }

    /// Discrete Fourier coefficient `f̃_k`, `|k| <= N/2`.
    pub fn coefficient(&self, k: i64) -> Complex64 {
        let half = (self.grid.len() / 2) as i64;
        assert!(k.abs() <= half, "mode {k} outside the band |k| <= {half}");
        self.coefficients[(k + half) as usize]
    }

    /// Largest entry magnitude, used for relative tolerances.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Fraction of a period in `[0, 1)`.
    fn phase(&self, t: f64) -> f64 {
        (t / self.grid.period).rem_euclid(1.0)
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let n = self.grid.len();
        let half = (n / 2) as i64;
        let u = self.phase(t);
        let mut acc = self.coefficient(0).re;
        for k in 1..half {
            let (s, c) = (TAU * k as f64 * u).sin_cos();
            let f = self.coefficient(k);
            acc += 2.0 * (f.re * c - f.im * s);
        }
        acc + self.coefficient(half).re * (TAU * half as f64 * u).cos()
    }

    /// The full complex primed sum; for real samples its imaginary part is
    /// roundoff only.
    pub fn evaluate_complex(&self, t: f64) -> Complex64 {
        let half = (self.grid.len() / 2) as i64;
        let u = self.phase(t);
        let mode = |k: i64| Complex64::from_polar(1.0, TAU * k as f64 * u);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in (1 - half)..half {
            acc += self.coefficient(k) * mode(k);
        }
        acc + 0.5 * (self.coefficient(half) * mode(half) + self.coefficient(-half) * mode(-half))
    }

    pub fn evaluate_many(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.evaluate(t)).collect()
    }

    /// `∫_0^t I_N f(s) ds` for any real `t`.
    pub fn integral_from_zero(&self, t: f64) -> f64 {
        let half = (self.grid.len() / 2) as i64;
        let u = self.phase(t);
        let mut acc = self.coefficient(0).re * t;
        for k in 1..half {
            let w = self.grid.omega(k);
            let (s, c) = (TAU * k as f64 * u).sin_cos();
            let f = self.coefficient(k);
            // 2 Re[f (e^{iωt} - 1) / (iω)]
            acc += 2.0 * (f.re * s + f.im * (c - 1.0)) / w;
        }
        let w = self.grid.omega(half);
        acc + self.coefficient(half).re * (TAU * half as f64 * u).sin() / w
    }

    /// Samples the interpolant on a grid with `n` nodes over the same period.
    pub fn resample(&self, n: usize) -> Result<Self> {
        let grid = EquispacedGrid::new(self.grid.period, n)?;
        let samples = self.evaluate_many(grid.nodes());
        Self::new(&grid, &samples)
    }
}

/// Trigonometric Lagrange basis `𝓕_j(t)` on `grid`.
pub fn lagrange_basis(grid: &EquispacedGrid, j: usize, t: f64) -> f64 {
    let n = grid.len() as f64;
    let x = PI * (t - grid.nodes[j]) / grid.period;
    let s = x.sin();
    if s.abs() < 1e-15 {
        // t coincides with t_j modulo T
        return 1.0;
    }
    (n * x).sin() * x.cos() / (n * s)
}

/// First-order Fourier integration matrix `Θ^T` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationMatrix {
    period: f64,
    order: usize,
    entries: Vec<f64>,
}

static NATURAL_FIMS: OnceLock<Mutex<HashMap<usize, Arc<IntegrationMatrix>>>> = OnceLock::new();

impl IntegrationMatrix {
    /// Assembles `Θ^T` for `grid` directly from the complex-exponential
    /// entry formula.
    pub fn build(grid: &EquispacedGrid) -> Result<Self> {
        let n = grid.len();
        let half = (n / 2) as i64;
        let roots: Vec<Complex64> = (0..n)
            .map(|d| Complex64::from_polar(1.0, TAU * d as f64 / n as f64))
            .collect();

        // sums[d] = Σ'_{k≠0} (1/k) e^{2πikd/N}, Nyquist pair at half weight
        let sums: Vec<Complex64> = (0..n)
            .map(|d| {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in -half..=half {
                    if k == 0 {
                        continue;
                    }
                    let w = if k.abs() == half { 0.5 } else { 1.0 };
                    let idx = (k * d as i64).rem_euclid(n as i64) as usize;
                    acc += roots[idx] * (w / k as f64);
                }
                acc
            })
            .collect();

        let t = grid.period;
        let factor = Complex64::new(0.0, t / TAU);
        let mut entries = vec![0.0; n * n];
        let mut residue = 0.0_f64;
        for l in 0..n {
            for j in 0..n {
                let s1 = sums[(n - j) % n];
                let s2 = sums[(l + n - j) % n];
                let z = (grid.nodes[l] + factor * (s1 - s2)) / n as f64;
                residue = residue.max(z.im.abs());
                entries[l * n + j] = z.re;
            }
        }
        if residue > FIM_IMAGINARY_TOLERANCE * t.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "integration matrix assembly left imaginary residue {residue:e}"
            )));
        }

        Ok(Self {
            period: t,
            order: n,
            entries,
        })
    }

    /// The natural FIM `Θ^{2π}` of order `n`, memoized.
    pub fn natural(n: usize) -> Result<Arc<Self>> {
        let cache = NATURAL_FIMS.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(fim) = cache.lock().unwrap().get(&n) {
            return Ok(Arc::clone(fim));
        }
        let fim = Arc::new(Self::build(&EquispacedGrid::natural(n)?)?);
        let mut guard = cache.lock().unwrap();
        Ok(Arc::clone(guard.entry(n).or_insert(fim)))
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Scaling factor `μ = T / 2π` relative to the natural FIM.
    pub fn scale(&self) -> f64 {
        self.period / TAU
    }

    pub fn entry(&self, l: usize, j: usize) -> f64 {
        self.entries[l * self.order + j]
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.entries[l * self.order..(l + 1) * self.order]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Direct product `Θ^T v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.order {
            return Err(invalid(format!(
                "vector of length {} does not match FIM order {}",
                v.len(),
                self.order
            )));
        }
        Ok((0..self.order).map(|l| dot(self.row(l), v)).collect())
    }

    /// `Θᵀ v`, used for multiplier back-propagation.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.order {
            return Err(invalid(format!(
                "vector of length {} does not match FIM order {}",
                v.len(),
                self.order
            )));
        }
        let mut out = vec![0.0; self.order];
        for (l, &vl) in v.iter().enumerate() {
            if vl != 0.0 {
                for (o, &e) in out.iter_mut().zip(self.row(l)) {
                    *o += e * vl;
                }
            }
        }
        Ok(out)
    }

    /// Row-major CSV dump with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for l in 0..self.order {
            let line: Vec<String> = self.row(l).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Running integrals `∫_0^{t_l} f` at every node, computed as
/// `μ (Θ^{2π} f)` with the cached natural FIM.
pub fn quad_to_nodes(fim: &IntegrationMatrix, samples: &[f64]) -> Result<Vec<f64>> {
    let natural = IntegrationMatrix::natural(fim.order)?;
    let mu = fim.scale();
    let mut out = natural.apply(samples)?;
    out.iter_mut().for_each(|v| *v *= mu);
    Ok(out)
}

/// Exact integral of the interpolant over one period, `(T/N) Σ f_j`.
pub fn full_period_integral(grid: &EquispacedGrid, samples: &[f64]) -> Result<f64> {
    if samples.len() != grid.len() {
        return Err(invalid(format!(
            "expected {} samples, got {}",
            grid.len(),
            samples.len()
        )));
    }
    Ok(grid.spacing() * samples.iter().sum::<f64>())
}

//! Dense primal-dual interior-point solver for equality-constrained
//! nonlinear programs with simple bounds.
//!
//! Newton steps come from the full symmetric KKT system, factorized with a
//! Bunch-Kaufman `LBLᵀ` decomposition whose inertia drives the Hessian and
//! constraint regularization. Globalization is an `ℓ1` merit line search on
//! the barrier objective with a second-order correction.

use std::fmt;
use std::sync::Arc;

use faer::prelude::*;
use faer::{ColRef, Mat, MatMut, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Smooth problem `min f(x)` subject to `c(x) = 0` and `lower <= x <= upper`.
pub trait NlpProblem {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Per-variable bounds; infinite entries mean no bound.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    fn constraints(&self, x: &[f64], c: &mut [f64]);
    /// Dense `m x n` constraint Jacobian. `jac` arrives zeroed.
    fn jacobian(&self, x: &[f64], jac: MatMut<'_, f64>);
    /// Hessian of `obj_factor * f + yᵀ c`. `hess` arrives zeroed; only the
    /// lower triangle (row >= column) is read.
    fn hessian(&self, x: &[f64], obj_factor: f64, y: &[f64], hess: MatMut<'_, f64>);
    /// Fixed factor applied to the objective before solving. `None` selects
    /// a gradient-based factor at the starting point.
    fn objective_scaling(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    InteriorPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Scaled first-order stationarity tolerance.
    pub stationarity_tol: f64,
    /// Infinity-norm tolerance on the equality residual.
    pub feasibility_tol: f64,
    /// Relative step length below which iterations stop.
    pub step_tol: f64,
    pub max_iterations: usize,
    pub max_line_search_steps: usize,
    pub initial_barrier: f64,
    /// Relative distance by which the start is pushed inside the box.
    pub bound_push: f64,
    /// Start bound multipliers at `μ / slack` instead of one, for restarts
    /// from a nearby solution.
    pub warm_start: bool,
}

impl SolverOptions {
    /// Settings for restarting from a converged solution of a nearby problem.
    pub fn warm(self) -> Self {
        Self {
            initial_barrier: self.initial_barrier.min(1e-5),
            bound_push: self.bound_push.min(1e-6),
            warm_start: true,
            ..self
        }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            stationarity_tol: 1e-6,
            feasibility_tol: 1e-8,
            step_tol: 1e-12,
            max_iterations: 500,
            max_line_search_steps: 40,
            initial_barrier: 0.1,
            bound_push: 1e-2,
            warm_start: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("stationarity_tol", self.stationarity_tol),
            ("feasibility_tol", self.feasibility_tol),
            ("step_tol", self.step_tol),
            ("initial_barrier", self.initial_barrier),
            ("bound_push", self.bound_push),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.bound_push >= 0.5 {
            return Err(invalid("bound_push must be below 0.5"));
        }
        if self.max_iterations == 0 || self.max_line_search_steps == 0 {
            return Err(invalid("iteration caps must be at least 1"));
        }
        Ok(())
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub barrier: f64,
    pub step_primal: f64,
    pub step_dual: f64,
    pub regularization: f64,
    pub line_search_trials: usize,
}

pub type Logger = Arc<dyn Fn(&IterationLog) + Send + Sync>;

#[derive(Clone)]
pub struct NlpSolverHandle {
    pub algorithm: Algorithm,
    pub options: SolverOptions,
    logger: Option<Logger>,
}

impl fmt::Debug for NlpSolverHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NlpSolverHandle")
            .field("algorithm", &self.algorithm)
            .field("options", &self.options)
            .field("logger", &self.logger.is_some())
            .finish()
    }
}

impl Default for NlpSolverHandle {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::InteriorPoint,
            options: SolverOptions::default(),
            logger: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktDiagnostics {
    /// `‖∇f + Jᵀλ - z_L + z_U‖∞` in unscaled quantities.
    pub lagrangian_gradient_norm: f64,
    /// Same measure after objective/constraint scaling and multiplier
    /// normalization; this is what the stationarity tolerance applies to.
    pub scaled_stationarity: f64,
    pub equality_residual_norm: f64,
    pub complementarity: f64,
    pub active_bounds: Vec<(usize, BoundSide)>,
    pub multipliers: Vec<f64>,
    pub lower_bound_multipliers: Vec<f64>,
    pub upper_bound_multipliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum SolveStatus {
    Converged,
    /// Steps fell below the step tolerance before the optimality tests passed.
    SmallStep,
    IterationLimit,
    LineSearchFailure,
    /// Inertia correction could not produce a usable factorization.
    SingularSystem,
    /// An evaluator returned a non-finite value.
    EvaluationError(String),
}

impl SolveStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, SolveStatus::Converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub diagnostics: KktDiagnostics,
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn first_non_finite(v: &[f64]) -> Option<usize> {
    v.iter().position(|x| !x.is_finite())
}

struct Evaluation {
    f: f64,
    grad: Vec<f64>,
    c: Vec<f64>,
    jac: Mat<f64>,
}

struct Bounds {
    lo: Vec<f64>,
    up: Vec<f64>,
}

impl Bounds {
    fn has_lo(&self, i: usize) -> bool {
        self.lo[i].is_finite()
    }

    fn has_up(&self, i: usize) -> bool {
        self.up[i].is_finite()
    }

    /// `-μ Σ ln(slack)`; `+∞` outside the interior.
    fn barrier(&self, x: &[f64], mu: f64) -> f64 {
        let mut b = 0.0;
        for i in 0..x.len() {
            if self.has_lo(i) {
                let s = x[i] - self.lo[i];
                if s <= 0.0 {
                    return f64::INFINITY;
                }
                b -= mu * s.ln();
            }
            if self.has_up(i) {
                let s = self.up[i] - x[i];
                if s <= 0.0 {
                    return f64::INFINITY;
                }
                b -= mu * s.ln();
            }
        }
        b
    }

    /// Largest step in `(0, 1]` keeping every slack above `(1 - tau)` of its value.
    fn max_step(&self, x: &[f64], dx: &[f64], tau: f64) -> f64 {
        let mut a = 1.0_f64;
        for i in 0..x.len() {
            if self.has_lo(i) && dx[i] < 0.0 {
                a = a.min(-tau * (x[i] - self.lo[i]) / dx[i]);
            }
            if self.has_up(i) && dx[i] > 0.0 {
                a = a.min(tau * (self.up[i] - x[i]) / dx[i]);
            }
        }
        a
    }
}

fn max_step_positive(z: &[f64], dz: &[f64], tau: f64) -> f64 {
    z.iter()
        .zip(dz)
        .filter(|(_, d)| **d < 0.0)
        .fold(1.0_f64, |a, (zi, di)| a.min(-tau * zi / di))
}

/// Number of positive, negative and (near) zero eigenvalues from the
/// block-diagonal factor.
fn inertia(diag: &[f64], subdiag: &[f64]) -> (usize, usize, usize) {
    // barrier terms can make the diagonal span many decades, so only
    // pivots that underflow count as zero; rank loss also shows up as a
    // missing negative pivot
    let tiny = f64::MIN_POSITIVE.sqrt();
    let (mut pos, mut neg, mut zero) = (0, 0, 0);
    let mut i = 0;
    while i < diag.len() {
        if i + 1 < diag.len() && subdiag[i] != 0.0 {
            let (a, b, c) = (diag[i], subdiag[i], diag[i + 1]);
            let det = a * c - b * b;
            if det.abs() <= tiny * tiny {
                zero += 1;
                if a + c > 0.0 {
                    pos += 1
                } else {
                    neg += 1
                }
            } else if det < 0.0 {
                pos += 1;
                neg += 1;
            } else if a + c > 0.0 {
                pos += 2;
            } else {
                neg += 2;
            }
            i += 2;
        } else {
            let d = diag[i];
            if d.abs() <= tiny {
                zero += 1;
            } else if d > 0.0 {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
    }
    (pos, neg, zero)
}

type Factor = faer::linalg::solvers::Lblt<f64>;

fn solve_with(factor: &Factor, rhs: &[f64]) -> Vec<f64> {
    let mut b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    factor.solve_in_place(b.as_mut());
    (0..rhs.len()).map(|i| b[(i, 0)]).collect()
}

fn mat_t_vec(a: MatRef<'_, f64>, v: &[f64]) -> Vec<f64> {
    let r = a.transpose() * ColRef::from_slice(v);
    (0..r.nrows()).map(|i| r[i]).collect()
}

impl NlpSolverHandle {
    pub fn new(options: SolverOptions) -> Result<Self> {
        options.validate()?;
        Ok(Self {
            algorithm: Algorithm::InteriorPoint,
            options,
            logger: None,
        })
    }

    pub fn with_logger(mut self, logger: Logger) -> Self {
        self.logger = Some(logger);
        self
    }

    fn log(&self, entry: &IterationLog) {
        if let Some(l) = &self.logger {
            l(entry);
        }
    }

    /// Runs the solver from `x0`. Invalid dimensions or bounds are errors;
    /// numerical trouble is reported through [`SolveResult::status`].
    pub fn minimize(&self, problem: &dyn NlpProblem, x0: &[f64]) -> Result<SolveResult> {
        self.options.validate()?;
        let n = problem.num_variables();
        let m = problem.num_constraints();
        if x0.len() != n {
            return Err(invalid(format!("starting point has length {}, expected {n}", x0.len())));
        }
        if m > n {
            return Err(invalid("more equality constraints than variables"));
        }
        let (lo, up) = problem.bounds();
        if lo.len() != n || up.len() != n {
            return Err(invalid("bound vectors have the wrong length"));
        }
        for i in 0..n {
            if lo[i].is_nan() || up[i].is_nan() || lo[i] >= up[i] {
                return Err(invalid(format!(
                    "variable {i} has an empty or degenerate box [{}, {}]",
                    lo[i], up[i]
                )));
            }
        }
        if let Some(i) = first_non_finite(x0) {
            return Err(invalid(format!("starting point entry {i} is not finite")));
        }
        Ipm::new(self, problem, Bounds { lo, up }, x0).run()
    }
}

struct Ipm<'a> {
    handle: &'a NlpSolverHandle,
    problem: &'a dyn NlpProblem,
    bounds: Bounds,
    n: usize,
    m: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
    obj_scale: f64,
    con_scale: Vec<f64>,
    mu: f64,
    filter: Filter,
    last_delta_w: f64,
}

/// Pairs of (infeasibility, barrier objective) that trial points must beat.
#[derive(Default)]
struct Filter {
    entries: Vec<(f64, f64)>,
    theta_max: f64,
    theta_min: f64,
    mu: f64,
}

impl Filter {
    fn rejects(&self, theta: f64, phi: f64) -> bool {
        theta > self.theta_max || self.entries.iter().any(|&(t, p)| theta >= t && phi >= p)
    }

    fn add(&mut self, theta: f64, phi: f64) {
        self.entries.retain(|&(t, p)| !(t >= theta && p >= phi));
        self.entries.push((theta, phi));
    }
}

const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const ARMIJO_ETA: f64 = 1e-4;

enum StepOutcome {
    Accepted {
        alpha: f64,
        alpha_z: f64,
        trials: usize,
        dx_norm: f64,
    },
    Failed,
}

impl<'a> Ipm<'a> {
    fn new(handle: &'a NlpSolverHandle, problem: &'a dyn NlpProblem, bounds: Bounds, x0: &[f64]) -> Self {
        let n = problem.num_variables();
        let m = problem.num_constraints();
        // push the start strictly inside the box
        let opts = handle.options;
        let push = opts.bound_push;
        let mut x = x0.to_vec();
        for i in 0..n {
            let (l, u) = (bounds.lo[i], bounds.up[i]);
            let width = u - l;
            if l.is_finite() {
                let p = (push * l.abs().max(1.0)).min(if width.is_finite() { push * width } else { f64::MAX });
                x[i] = x[i].max(l + p);
            }
            if u.is_finite() {
                let p = (push * u.abs().max(1.0)).min(if width.is_finite() { push * width } else { f64::MAX });
                x[i] = x[i].min(u - p);
            }
        }
        let mu = opts.initial_barrier;
        let z0 = |s: f64| if opts.warm_start { mu / s } else { 1.0 };
        let zl = (0..n)
            .map(|i| if bounds.has_lo(i) { z0(x[i] - bounds.lo[i]) } else { 0.0 })
            .collect();
        let zu = (0..n)
            .map(|i| if bounds.has_up(i) { z0(bounds.up[i] - x[i]) } else { 0.0 })
            .collect();
        Self {
            handle,
            problem,
            bounds,
            n,
            m,
            x,
            y: vec![0.0; m],
            zl,
            zu,
            obj_scale: 1.0,
            con_scale: vec![1.0; m],
            mu: handle.options.initial_barrier,
            filter: Filter::default(),
            last_delta_w: 0.0,
        }
    }

    fn evaluate(&self, x: &[f64]) -> std::result::Result<Evaluation, String> {
        let f = self.problem.objective(x);
        if !f.is_finite() {
            return Err("objective is not finite".into());
        }
        let mut grad = vec![0.0; self.n];
        self.problem.gradient(x, &mut grad);
        if let Some(i) = first_non_finite(&grad) {
            return Err(format!("gradient entry {i} is not finite"));
        }
        let mut c = vec![0.0; self.m];
        self.problem.constraints(x, &mut c);
        if let Some(i) = first_non_finite(&c) {
            return Err(format!("constraint {i} is not finite"));
        }
        let mut jac = Mat::zeros(self.m, self.n);
        self.problem.jacobian(x, jac.as_mut());
        for j in 0..self.n {
            for i in 0..self.m {
                if !jac[(i, j)].is_finite() {
                    return Err(format!("Jacobian entry ({i}, {j}) is not finite"));
                }
            }
        }
        Ok(Evaluation { f, grad, c, jac })
    }

    /// Objective and constraints only, both already scaled.
    fn trial_values(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let f = self.problem.objective(x);
        let mut c = vec![0.0; self.m];
        self.problem.constraints(x, &mut c);
        if !f.is_finite() || first_non_finite(&c).is_some() {
            return None;
        }
        for (ci, s) in c.iter_mut().zip(&self.con_scale) {
            *ci *= s;
        }
        Some((self.obj_scale * f, c))
    }

    fn setup_scaling(&mut self, ev: &Evaluation) {
        self.obj_scale = self
            .problem
            .objective_scaling()
            .unwrap_or_else(|| (100.0 / norm_inf(&ev.grad).max(1e-300)).min(1.0));
        for i in 0..self.m {
            let row = (0..self.n).fold(0.0_f64, |a, j| a.max(ev.jac[(i, j)].abs()));
            self.con_scale[i] = if row > 0.0 { (100.0 / row).min(1.0) } else { 1.0 };
        }
    }

    fn scaled_jacobian(&self, ev: &Evaluation) -> Mat<f64> {
        Mat::from_fn(self.m, self.n, |i, j| self.con_scale[i] * ev.jac[(i, j)])
    }

    fn barrier_objective(&self, f_s: f64, x: &[f64]) -> f64 {
        f_s + self.bounds.barrier(x, self.mu)
    }

    /// Dual residual `s_f ∇f + J_sᵀ y - z_L + z_U`.
    fn dual_residual(&self, grad: &[f64], jac_s: MatRef<'_, f64>) -> Vec<f64> {
        let jty = mat_t_vec(jac_s, &self.y);
        (0..self.n)
            .map(|i| self.obj_scale * grad[i] + jty[i] - self.zl[i] + self.zu[i])
            .collect()
    }

    fn complementarity(&self, target: f64) -> f64 {
        let mut e = 0.0_f64;
        for i in 0..self.n {
            if self.bounds.has_lo(i) {
                e = e.max(((self.x[i] - self.bounds.lo[i]) * self.zl[i] - target).abs());
            }
            if self.bounds.has_up(i) {
                e = e.max(((self.bounds.up[i] - self.x[i]) * self.zu[i] - target).abs());
            }
        }
        e
    }

    fn dual_scale(&self) -> f64 {
        let s_max = 100.0;
        let total: f64 = self.y.iter().chain(&self.zl).chain(&self.zu).map(|v| v.abs()).sum();
        let count = (self.n + self.m) as f64;
        (total / count).max(s_max) / s_max
    }

    fn initial_multipliers(&mut self, ev: &Evaluation, jac_s: MatRef<'_, f64>) {
        if self.m == 0 {
            return;
        }
        let (n, m) = (self.n, self.m);
        let mut k = Mat::<f64>::zeros(n + m, n + m);
        for i in 0..n {
            k[(i, i)] = 1.0;
        }
        for i in 0..m {
            for j in 0..n {
                k[(n + i, j)] = jac_s[(i, j)];
            }
        }
        let factor = k.lblt(Side::Lower);
        let (_, neg, zero) = inertia(&diag_of(&factor), &subdiag_of(&factor));
        if neg != m || zero != 0 {
            return;
        }
        let mut rhs = vec![0.0; n + m];
        for i in 0..n {
            rhs[i] = -(self.obj_scale * ev.grad[i] - self.zl[i] + self.zu[i]);
        }
        let sol = solve_with(&factor, &rhs);
        let y: Vec<f64> = sol[n..].to_vec();
        if norm_inf(&y) <= 1e3 && first_non_finite(&y).is_none() {
            self.y = y;
        }
    }

    fn sigma(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut s = 0.0;
                if self.bounds.has_lo(i) {
                    s += self.zl[i] / (self.x[i] - self.bounds.lo[i]);
                }
                if self.bounds.has_up(i) {
                    s += self.zu[i] / (self.bounds.up[i] - self.x[i]);
                }
                s
            })
            .collect()
    }

    /// Gradient of the scaled barrier objective.
    fn barrier_gradient(&self, grad: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut g = self.obj_scale * grad[i];
                if self.bounds.has_lo(i) {
                    g -= self.mu / (self.x[i] - self.bounds.lo[i]);
                }
                if self.bounds.has_up(i) {
                    g += self.mu / (self.bounds.up[i] - self.x[i]);
                }
                g
            })
            .collect()
    }

    /// Assembles the KKT matrix at the current iterate without regularization.
    fn assemble(&self, jac_s: MatRef<'_, f64>, sigma: &[f64]) -> Mat<f64> {
        let (n, m) = (self.n, self.m);
        let mut k = Mat::<f64>::zeros(n + m, n + m);
        let y_orig: Vec<f64> = self.y.iter().zip(&self.con_scale).map(|(y, s)| y * s).collect();
        self.problem
            .hessian(&self.x, self.obj_scale, &y_orig, k.as_mut().submatrix_mut(0, 0, n, n));
        for j in 0..n {
            for i in 0..j {
                k[(i, j)] = 0.0;
            }
            k[(j, j)] += sigma[j];
        }
        for i in 0..m {
            for j in 0..n {
                k[(n + i, j)] = jac_s[(i, j)];
            }
        }
        k
    }

    /// Factorizes with inertia correction; returns the factor and `δ_w`.
    fn factorize(&mut self, k: &mut Mat<f64>, min_delta_w: f64) -> Option<(Factor, f64)> {
        let (n, m) = (self.n, self.m);
        let mut delta_w = 0.0_f64;
        let mut delta_c = 0.0_f64;
        let set_diag = |k: &mut Mat<f64>, old: (f64, f64), new: (f64, f64)| {
            for i in 0..n {
                k[(i, i)] += new.0 - old.0;
            }
            for i in 0..m {
                k[(n + i, n + i)] -= new.1 - old.1;
            }
        };
        if min_delta_w > 0.0 {
            set_diag(k, (0.0, 0.0), (min_delta_w, 0.0));
            delta_w = min_delta_w;
        }
        for attempt in 0..60 {
            let factor = k.lblt(Side::Lower);
            let (pos, neg, zero) = inertia(&diag_of(&factor), &subdiag_of(&factor));
            if pos == n && neg == m && zero == 0 {
                if delta_w > 0.0 {
                    self.last_delta_w = delta_w;
                }
                return Some((factor, delta_w));
            }
            let old = (delta_w, delta_c);
            if (zero > 0 || neg < m) && m > 0 {
                // rank-deficient constraint block
                delta_c = if delta_c == 0.0 {
                    1e-8 * self.mu.powf(0.25)
                } else if attempt > 10 {
                    (10.0 * delta_c).min(1e-2)
                } else {
                    delta_c
                };
            }
            if attempt > 0 || !(zero > 0 && neg + zero == m && pos == n) {
                delta_w = if delta_w == 0.0 {
                    if self.last_delta_w == 0.0 {
                        1e-4
                    } else {
                        (self.last_delta_w / 3.0).max(1e-20)
                    }
                } else if self.last_delta_w == 0.0 || delta_w < self.last_delta_w {
                    100.0 * delta_w
                } else {
                    8.0 * delta_w
                };
            }
            if delta_w > 1e40 {
                return None;
            }
            set_diag(k, old, (delta_w, delta_c));
        }
        None
    }

    fn run(mut self) -> Result<SolveResult> {
        let opts = self.handle.options;
        let n = self.n;
        let mut ev = match self.evaluate(&self.x) {
            Ok(ev) => ev,
            Err(msg) => return Ok(self.finish_error(msg, 0)),
        };
        self.setup_scaling(&ev);
        let mut jac_s = self.scaled_jacobian(&ev);
        self.initial_multipliers(&ev, jac_s.as_ref());

        let mu_min = opts.stationarity_tol.min(opts.feasibility_tol.sqrt()) / 10.0;
        let mut best: Option<(Vec<f64>, f64, f64)> = None;
        let mut status = SolveStatus::IterationLimit;
        let mut iterations = 0;
        let mut extra_reg = 0.0_f64;
        let mut small_steps = 0;

        for iter in 0..opts.max_iterations {
            iterations = iter;
            let c_s: Vec<f64> = ev.c.iter().zip(&self.con_scale).map(|(c, s)| c * s).collect();
            let inf_pr = norm_inf(&ev.c);
            let s_d = self.dual_scale();
            let r_d = self.dual_residual(&ev.grad, jac_s.as_ref());
            let inf_du = norm_inf(&r_d) / s_d;
            let compl = self.complementarity(0.0) / s_d;

            track_best(&mut best, &self.x, inf_pr, ev.f, opts.feasibility_tol);

            if inf_pr <= opts.feasibility_tol && inf_du <= opts.stationarity_tol && compl <= opts.stationarity_tol {
                status = SolveStatus::Converged;
                break;
            }

            // barrier update
            loop {
                let e_mu = inf_du.max(norm_inf(&c_s)).max(self.complementarity(self.mu) / s_d);
                if e_mu <= 10.0 * self.mu && self.mu > mu_min {
                    self.mu = (self.mu * 0.2).min(self.mu.powf(1.5)).max(mu_min);
                } else {
                    break;
                }
            }
            let tau = (1.0 - self.mu).max(0.99);

            let sigma = self.sigma();
            let mut k = self.assemble(jac_s.as_ref(), &sigma);
            let Some((factor, delta_w)) = self.factorize(&mut k, extra_reg) else {
                status = SolveStatus::SingularSystem;
                break;
            };
            let g_b = self.barrier_gradient(&ev.grad);
            let jty = mat_t_vec(jac_s.as_ref(), &self.y);
            let grad_lag: Vec<f64> = (0..n).map(|i| g_b[i] + jty[i]).collect();
            let mut rhs: Vec<f64> = grad_lag.iter().map(|v| -v).collect();
            rhs.extend(c_s.iter().map(|v| -v));
            let sol = solve_with(&factor, &rhs);
            let (dx, dy) = sol.split_at(n);
            if first_non_finite(&sol).is_some() {
                status = SolveStatus::SingularSystem;
                break;
            }

            let gtd: f64 = g_b.iter().zip(dx).map(|(a, b)| a * b).sum();
            let theta0 = norm1(&c_s);
            if iter == 0 {
                self.filter.theta_max = 1e4 * theta0.max(1.0);
                self.filter.theta_min = 1e-4 * theta0.max(1.0);
            }
            if self.filter.mu != self.mu {
                self.filter.entries.clear();
                self.filter.mu = self.mu;
            }

            let dzl: Vec<f64> = (0..n)
                .map(|i| {
                    if self.bounds.has_lo(i) {
                        let s = self.x[i] - self.bounds.lo[i];
                        self.mu / s - self.zl[i] - self.zl[i] / s * dx[i]
                    } else {
                        0.0
                    }
                })
                .collect();
            let dzu: Vec<f64> = (0..n)
                .map(|i| {
                    if self.bounds.has_up(i) {
                        let s = self.bounds.up[i] - self.x[i];
                        self.mu / s - self.zu[i] + self.zu[i] / s * dx[i]
                    } else {
                        0.0
                    }
                })
                .collect();

            let outcome = self.line_search(&factor, dx, dy, &dzl, &dzu, &c_s, &grad_lag, ev.f, gtd, tau);
            match outcome {
                StepOutcome::Accepted {
                    alpha,
                    alpha_z,
                    trials,
                    dx_norm,
                } => {
                    extra_reg = 0.0;
                    match self.evaluate(&self.x) {
                        Ok(e) => ev = e,
                        Err(msg) => return Ok(self.finish_error(msg, iter)),
                    }
                    jac_s = self.scaled_jacobian(&ev);
                    self.log_iteration(iter, &ev, inf_du, alpha, alpha_z, delta_w, trials);
                    let x_scale = 1.0 + norm_inf(&self.x);
                    if dx_norm <= opts.step_tol * x_scale {
                        small_steps += 1;
                        if self.mu <= mu_min && small_steps >= 3 {
                            status = SolveStatus::SmallStep;
                            iterations = iter + 1;
                            let inf_pr = norm_inf(&ev.c);
                            track_best(&mut best, &self.x, inf_pr, ev.f, opts.feasibility_tol);
                            break;
                        }
                    } else {
                        small_steps = 0;
                    }
                }
                StepOutcome::Failed => {
                    extra_reg = if extra_reg == 0.0 {
                        1e-4_f64.max(10.0 * delta_w)
                    } else {
                        100.0 * extra_reg
                    };
                    if extra_reg > 1e20 {
                        status = SolveStatus::LineSearchFailure;
                        break;
                    }
                }
            }
            iterations = iter + 1;
        }

        let converged = status.is_converged();
        if !converged {
            if let Some((bx, _, _)) = &best {
                if bx != &self.x {
                    let restored = bx.clone();
                    self.x = restored;
                    if let Ok(e) = self.evaluate(&self.x) {
                        ev = e;
                        jac_s = self.scaled_jacobian(&ev);
                    }
                }
            }
        }
        let diagnostics = self.diagnostics(&ev, jac_s.as_ref());
        Ok(SolveResult {
            objective: ev.f,
            x: self.x,
            status,
            iterations,
            diagnostics,
        })
    }

    /// Filter acceptance test for a trial point; `Some(true)` means the
    /// step was accepted on the objective alone.
    fn acceptable(&self, theta0: f64, phi0: f64, gtd: f64, alpha: f64, theta: f64, phi: f64) -> Option<bool> {
        if self.filter.rejects(theta, phi) {
            return None;
        }
        let switching = gtd < 0.0 && alpha * (-gtd).powf(2.3) > theta0.powf(1.1);
        if switching && theta0 <= self.filter.theta_min {
            return (phi <= phi0 + ARMIJO_ETA * alpha * gtd).then_some(true);
        }
        let sufficient = (theta0 > 0.0 && theta <= (1.0 - GAMMA_THETA) * theta0) || phi <= phi0 - GAMMA_PHI * theta0;
        sufficient.then_some(false)
    }

    #[allow(clippy::too_many_arguments)]
    fn line_search(
        &mut self,
        factor: &Factor,
        dx: &[f64],
        dy: &[f64],
        dzl: &[f64],
        dzu: &[f64],
        c_s: &[f64],
        grad_lag: &[f64],
        f_unscaled: f64,
        gtd: f64,
        tau: f64,
    ) -> StepOutcome {
        let n = self.n;
        let opts = self.handle.options;
        let alpha_max = self.bounds.max_step(&self.x, dx, tau);
        let alpha_z = max_step_positive(&self.zl, dzl, tau).min(max_step_positive(&self.zu, dzu, tau));
        let theta0 = norm1(c_s);
        let phi0 = self.barrier_objective(self.obj_scale * f_unscaled, &self.x);
        let mut alpha = alpha_max;
        let trial_point =
            |x: &[f64], d: &[f64], a: f64| -> Vec<f64> { x.iter().zip(d).map(|(x, d)| x + a * d).collect() };

        for trial in 0..opts.max_line_search_steps {
            let xt = trial_point(&self.x, dx, alpha);
            if let Some((ft, ct)) = self.trial_values(&xt) {
                let (theta, phi) = (norm1(&ct), self.barrier_objective(ft, &xt));
                if let Some(f_type) = self.acceptable(theta0, phi0, gtd, alpha, theta, phi) {
                    if !f_type {
                        self.filter.add((1.0 - GAMMA_THETA) * theta0, phi0 - GAMMA_PHI * theta0);
                    }
                    self.accept(xt, dy, dzl, dzu, alpha, alpha_z);
                    return StepOutcome::Accepted {
                        alpha,
                        alpha_z,
                        trials: trial + 1,
                        dx_norm: alpha * norm_inf(dx),
                    };
                }
                if trial == 0 && theta >= theta0 && self.m > 0 {
                    // second-order correction against constraint curvature
                    let mut rhs: Vec<f64> = grad_lag.iter().map(|v| -v).collect();
                    rhs.extend(c_s.iter().zip(&ct).map(|(c0, c1)| -(alpha * c0 + c1)));
                    let sol = solve_with(factor, &rhs);
                    let (dx_soc, _) = sol.split_at(n);
                    if first_non_finite(dx_soc).is_none() {
                        let a_soc = self.bounds.max_step(&self.x, dx_soc, tau);
                        let xs = trial_point(&self.x, dx_soc, a_soc);
                        if let Some((fs, cs)) = self.trial_values(&xs) {
                            let (theta_s, phi_s) = (norm1(&cs), self.barrier_objective(fs, &xs));
                            if let Some(f_type) = self.acceptable(theta0, phi0, gtd, alpha, theta_s, phi_s) {
                                if !f_type {
                                    self.filter.add((1.0 - GAMMA_THETA) * theta0, phi0 - GAMMA_PHI * theta0);
                                }
                                self.accept(xs, dy, dzl, dzu, alpha, alpha_z);
                                return StepOutcome::Accepted {
                                    alpha,
                                    alpha_z,
                                    trials: trial + 1,
                                    dx_norm: a_soc * norm_inf(dx_soc),
                                };
                            }
                        }
                    }
                }
            }
            alpha *= 0.5;
            if alpha * norm_inf(dx) < 1e-16 * (1.0 + norm_inf(&self.x)) {
                break;
            }
        }
        if theta0 > self.filter.theta_min.min(opts.feasibility_tol) {
            return self.restoration_step(factor, c_s, dy, dzl, dzu, phi0, tau, alpha_z);
        }
        StepOutcome::Failed
    }

    /// Feasibility step `J dx = -c` taken with the current factorization,
    /// backtracked on the infeasibility alone.
    #[allow(clippy::too_many_arguments)]
    fn restoration_step(
        &mut self,
        factor: &Factor,
        c_s: &[f64],
        dy: &[f64],
        dzl: &[f64],
        dzu: &[f64],
        phi0: f64,
        tau: f64,
        alpha_z: f64,
    ) -> StepOutcome {
        let n = self.n;
        let theta0 = norm1(c_s);
        let mut rhs = vec![0.0; n];
        rhs.extend(c_s.iter().map(|c| -c));
        let sol = solve_with(factor, &rhs);
        let dx_r = &sol[..n];
        if first_non_finite(dx_r).is_some() {
            return StepOutcome::Failed;
        }
        let mut alpha = self.bounds.max_step(&self.x, dx_r, tau);
        for trial in 0..self.handle.options.max_line_search_steps {
            let xt: Vec<f64> = self.x.iter().zip(dx_r).map(|(x, d)| x + alpha * d).collect();
            if let Some((_, ct)) = self.trial_values(&xt) {
                if norm1(&ct) <= (1.0 - GAMMA_THETA) * theta0 {
                    self.filter.add(theta0, phi0);
                    self.accept(xt, dy, dzl, dzu, 0.0, alpha_z.min(alpha));
                    return StepOutcome::Accepted {
                        alpha,
                        alpha_z,
                        trials: trial + 1,
                        dx_norm: alpha * norm_inf(dx_r),
                    };
                }
            }
            alpha *= 0.5;
        }
        StepOutcome::Failed
    }

    fn accept(&mut self, x: Vec<f64>, dy: &[f64], dzl: &[f64], dzu: &[f64], alpha: f64, alpha_z: f64) {
        self.x = x;
        for i in 0..self.m {
            self.y[i] += alpha * dy[i];
        }
        let kappa = 1e10;
        for i in 0..self.n {
            if self.bounds.has_lo(i) {
                let s = self.x[i] - self.bounds.lo[i];
                let z = self.zl[i] + alpha_z * dzl[i];
                self.zl[i] = z.clamp(self.mu / (kappa * s), kappa * self.mu / s);
            }
            if self.bounds.has_up(i) {
                let s = self.bounds.up[i] - self.x[i];
                let z = self.zu[i] + alpha_z * dzu[i];
                self.zu[i] = z.clamp(self.mu / (kappa * s), kappa * self.mu / s);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn log_iteration(
        &self,
        iter: usize,
        ev: &Evaluation,
        inf_du: f64,
        alpha: f64,
        alpha_z: f64,
        delta_w: f64,
        trials: usize,
    ) {
        self.handle.log(&IterationLog {
            iteration: iter,
            objective: ev.f,
            primal_infeasibility: norm_inf(&ev.c),
            dual_infeasibility: inf_du,
            barrier: self.mu,
            step_primal: alpha,
            step_dual: alpha_z,
            regularization: delta_w,
            line_search_trials: trials,
        });
    }

    fn diagnostics(&self, ev: &Evaluation, jac_s: MatRef<'_, f64>) -> KktDiagnostics {
        let s_d = self.dual_scale();
        let r_d = self.dual_residual(&ev.grad, jac_s);
        let inv = 1.0 / self.obj_scale;
        let multipliers: Vec<f64> = self.y.iter().zip(&self.con_scale).map(|(y, s)| y * s * inv).collect();
        let zl: Vec<f64> = self.zl.iter().map(|z| z * inv).collect();
        let zu: Vec<f64> = self.zu.iter().map(|z| z * inv).collect();
        let jty = mat_t_vec(ev.jac.as_ref(), &multipliers);
        let lag = (0..self.n).fold(0.0_f64, |a, i| a.max((ev.grad[i] + jty[i] - zl[i] + zu[i]).abs()));
        let mut active = Vec::new();
        for i in 0..self.n {
            let tol = 1e-6;
            if self.bounds.has_lo(i) && self.x[i] - self.bounds.lo[i] <= tol * (1.0 + self.bounds.lo[i].abs()) {
                active.push((i, BoundSide::Lower));
            }
            if self.bounds.has_up(i) && self.bounds.up[i] - self.x[i] <= tol * (1.0 + self.bounds.up[i].abs()) {
                active.push((i, BoundSide::Upper));
            }
        }
        KktDiagnostics {
            lagrangian_gradient_norm: lag,
            scaled_stationarity: norm_inf(&r_d) / s_d,
            equality_residual_norm: norm_inf(&ev.c),
            complementarity: self.complementarity(0.0) * inv,
            active_bounds: active,
            multipliers,
            lower_bound_multipliers: zl,
            upper_bound_multipliers: zu,
        }
    }

    fn finish_error(self, msg: String, iterations: usize) -> SolveResult {
        let n = self.n;
        let f = self.problem.objective(&self.x);
        let mut c = vec![0.0; self.m];
        self.problem.constraints(&self.x, &mut c);
        SolveResult {
            objective: f,
            status: SolveStatus::EvaluationError(msg),
            iterations,
            diagnostics: KktDiagnostics {
                lagrangian_gradient_norm: f64::NAN,
                scaled_stationarity: f64::NAN,
                equality_residual_norm: norm_inf(&c),
                complementarity: f64::NAN,
                active_bounds: Vec::new(),
                multipliers: self.y.clone(),
                lower_bound_multipliers: vec![0.0; n],
                upper_bound_multipliers: vec![0.0; n],
            },
            x: self.x,
        }
    }
}

fn track_best(best: &mut Option<(Vec<f64>, f64, f64)>, x: &[f64], inf_pr: f64, f: f64, feas_tol: f64) {
    let better = match best {
        None => true,
        Some((_, bi, bf)) => {
            let (cur_feas, best_feas) = (inf_pr <= feas_tol, *bi <= feas_tol);
            match (cur_feas, best_feas) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => f < *bf,
                (false, false) => inf_pr < *bi,
            }
        }
    };
    if better {
        *best = Some((x.to_vec(), inf_pr, f));
    }
}

fn diag_of(f: &Factor) -> Vec<f64> {
    f.B_diag().column_vector().iter().copied().collect()
}

fn subdiag_of(f: &Factor) -> Vec<f64> {
    f.B_subdiag().column_vector().iter().copied().collect()
}

/// Largest elementwise deviation between the analytic Jacobian and central
/// differences with step `step`, relative to `max(1, |entry|)`.
pub fn check_jacobian(problem: &dyn NlpProblem, x: &[f64], step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let n = problem.num_variables();
    let m = problem.num_constraints();
    if x.len() != n {
        return Err(invalid("point has the wrong length"));
    }
    let mut jac = Mat::zeros(m, n);
    problem.jacobian(x, jac.as_mut());
    let mut xp = x.to_vec();
    let (mut cp, mut cm) = (vec![0.0; m], vec![0.0; m]);
    let mut worst = 0.0_f64;
    for j in 0..n {
        xp[j] = x[j] + step;
        problem.constraints(&xp, &mut cp);
        xp[j] = x[j] - step;
        problem.constraints(&xp, &mut cm);
        xp[j] = x[j];
        for i in 0..m {
            let fd = (cp[i] - cm[i]) / (2.0 * step);
            let a = jac[(i, j)];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1.0));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Clipped;

    impl NlpProblem for Clipped {
        fn num_variables(&self) -> usize {
            1
        }
        fn num_constraints(&self) -> usize {
            0
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0], vec![2.0])
        }
        fn objective(&self, x: &[f64]) -> f64 {
            (x[0] - 3.0).powi(2)
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            g[0] = 2.0 * (x[0] - 3.0);
        }
        fn constraints(&self, _: &[f64], _: &mut [f64]) {}
        fn jacobian(&self, _: &[f64], _: MatMut<'_, f64>) {}
        fn hessian(&self, _: &[f64], s: f64, _: &[f64], mut h: MatMut<'_, f64>) {
            h[(0, 0)] = 2.0 * s;
        }
    }

    struct Circle;

    impl NlpProblem for Circle {
        fn num_variables(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![f64::NEG_INFINITY; 2], vec![f64::INFINITY; 2])
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x[0] + x[1]
        }
        fn gradient(&self, _: &[f64], g: &mut [f64]) {
            g.fill(1.0);
        }
        fn constraints(&self, x: &[f64], c: &mut [f64]) {
            c[0] = x[0] * x[0] + x[1] * x[1] - 1.0;
        }
        fn jacobian(&self, x: &[f64], mut j: MatMut<'_, f64>) {
            j[(0, 0)] = 2.0 * x[0];
            j[(0, 1)] = 2.0 * x[1];
        }
        fn hessian(&self, _: &[f64], _: f64, y: &[f64], mut h: MatMut<'_, f64>) {
            h[(0, 0)] = 2.0 * y[0];
            h[(1, 1)] = 2.0 * y[0];
        }
    }

    /// Rosenbrock with `x_1 = 1` and an optional corrupted Jacobian entry.
    struct Rosenbrock {
        corrupt: bool,
    }

    impl NlpProblem for Rosenbrock {
        fn num_variables(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![f64::NEG_INFINITY; 2], vec![f64::INFINITY; 2])
        }
        fn objective(&self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            let r = x[1] - x[0] * x[0];
            g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * r;
            g[1] = 200.0 * r;
        }
        fn constraints(&self, x: &[f64], c: &mut [f64]) {
            c[0] = x[0] - 1.0;
        }
        fn jacobian(&self, _: &[f64], mut j: MatMut<'_, f64>) {
            j[(0, 0)] = if self.corrupt { 1.5 } else { 1.0 };
        }
        fn hessian(&self, x: &[f64], s: f64, _: &[f64], mut h: MatMut<'_, f64>) {
            h[(0, 0)] = s * (2.0 - 400.0 * (x[1] - 3.0 * x[0] * x[0]));
            h[(1, 0)] = s * (-400.0 * x[0]);
            h[(1, 1)] = s * 200.0;
        }
    }

    /// `min ‖x‖²` subject to `x_0 = 1`.
    struct PinnedNorm(usize);

    impl NlpProblem for PinnedNorm {
        fn num_variables(&self) -> usize {
            self.0
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![f64::NEG_INFINITY; self.0], vec![f64::INFINITY; self.0])
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x.iter().map(|v| v * v).sum()
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            for (g, x) in g.iter_mut().zip(x) {
                *g = 2.0 * x;
            }
        }
        fn constraints(&self, x: &[f64], c: &mut [f64]) {
            c[0] = x[0] - 1.0;
        }
        fn jacobian(&self, _: &[f64], mut j: MatMut<'_, f64>) {
            j[(0, 0)] = 1.0;
        }
        fn hessian(&self, _: &[f64], s: f64, _: &[f64], mut h: MatMut<'_, f64>) {
            for i in 0..self.0 {
                h[(i, i)] = 2.0 * s;
            }
        }
    }

    struct Poisoned;

    impl NlpProblem for Poisoned {
        fn num_variables(&self) -> usize {
            1
        }
        fn num_constraints(&self) -> usize {
            0
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![f64::NEG_INFINITY], vec![f64::INFINITY])
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x[0]
        }
        fn gradient(&self, _: &[f64], g: &mut [f64]) {
            g[0] = f64::NAN;
        }
        fn constraints(&self, _: &[f64], _: &mut [f64]) {}
        fn jacobian(&self, _: &[f64], _: MatMut<'_, f64>) {}
        fn hessian(&self, _: &[f64], _: f64, _: &[f64], _: MatMut<'_, f64>) {}
    }

    fn solver() -> NlpSolverHandle {
        NlpSolverHandle::default()
    }

    #[test]
    fn clipped_quadratic_hits_upper_bound() {
        let r = solver().minimize(&Clipped, &[1.0]).unwrap();
        assert!(r.status.is_converged(), "{:?}", r.status);
        assert!((r.x[0] - 2.0).abs() < 1e-6, "{}", r.x[0]);
        assert_eq!(r.diagnostics.active_bounds, vec![(0, BoundSide::Upper)]);
        assert!((r.diagnostics.upper_bound_multipliers[0] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn circle_minimum() {
        let r = solver().minimize(&Circle, &[0.5, -0.2]).unwrap();
        assert!(r.status.is_converged(), "{:?}", r.status);
        let s = -std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.x[0] - s).abs() < 1e-8 && (r.x[1] - s).abs() < 1e-8, "{:?}", r.x);
        assert!(r.diagnostics.equality_residual_norm <= 1e-8);
        // λ = 1/√2 from ∇f + λ∇c = 0
        assert!((r.diagnostics.multipliers[0] + s).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_on_a_line() {
        let r = solver().minimize(&Rosenbrock { corrupt: false }, &[-1.2, 1.0]).unwrap();
        assert!(r.status.is_converged(), "{:?}", r.status);
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn pinned_norm_gives_unit_vector() {
        let r = solver().minimize(&PinnedNorm(5), &[0.3, -2.0, 1.0, 4.0, 0.5]).unwrap();
        assert!(r.status.is_converged());
        assert!((r.x[0] - 1.0).abs() < 1e-10);
        assert!(r.x[1..].iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let a = solver().minimize(&Rosenbrock { corrupt: false }, &[-1.2, 1.0]).unwrap();
        let b = solver().minimize(&Rosenbrock { corrupt: false }, &[-1.2, 1.0]).unwrap();
        assert_eq!(
            a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn logger_sees_every_iteration() {
        use std::sync::Mutex;
        let lines = Arc::new(Mutex::new(Vec::new()));
        let sink = lines.clone();
        let h = solver().with_logger(Arc::new(move |l: &IterationLog| sink.lock().unwrap().push(*l)));
        let r = h.minimize(&Circle, &[0.5, -0.2]).unwrap();
        let lines = lines.lock().unwrap();
        assert!(!lines.is_empty() && lines.len() <= r.iterations);
        assert!(lines.windows(2).all(|w| w[1].iteration > w[0].iteration));
    }

    #[test]
    fn non_finite_evaluations_are_reported() {
        let r = solver().minimize(&Poisoned, &[0.0]).unwrap();
        match r.status {
            SolveStatus::EvaluationError(msg) => assert!(msg.contains("gradient"), "{msg}"),
            s => panic!("unexpected status {s:?}"),
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(solver().minimize(&Circle, &[0.0]).is_err());
        assert!(solver().minimize(&Circle, &[f64::NAN, 0.0]).is_err());
        let opts = SolverOptions {
            max_iterations: 0,
            ..SolverOptions::default()
        };
        assert!(NlpSolverHandle::new(opts).is_err());
    }

    #[test]
    fn jacobian_check_flags_corruption() {
        let good = check_jacobian(&Rosenbrock { corrupt: false }, &[0.3, 0.7], 1e-2).unwrap();
        assert!(good < 1e-12, "{good}");
        let bad = check_jacobian(&Rosenbrock { corrupt: true }, &[0.3, 0.7], 1e-2).unwrap();
        assert!(bad > 1e-2, "{bad}");
        let curved = check_jacobian(&Circle, &[0.3, 0.7], 1e-6).unwrap();
        assert!(curved < 1e-8, "{curved}");
        assert!(check_jacobian(&Circle, &[0.3, 0.7], 0.0).is_err());
    }

    #[test]
    fn inertia_counts_blocks() {
        assert_eq!(inertia(&[1.0, -2.0, 3.0], &[0.0, 0.0, 0.0]), (2, 1, 0));
        // [[1, 2], [2, 1]] has eigenvalues 3 and -1
        assert_eq!(inertia(&[1.0, 1.0], &[2.0, 0.0]), (1, 1, 0));
        assert_eq!(inertia(&[1.0, 0.0], &[0.0, 0.0]), (1, 0, 1));
    }
}

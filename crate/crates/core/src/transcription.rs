//! Periodic UAV endurance problem transcribed with the natural Fourier
//! integration matrix.
//!
//! Time is normalized to `τ ∈ [0, 2π)` through `t = μτ`, `μ = T_f/(2π)`. The
//! states satisfy the integral-form dynamics at every node,
//! `ξ_l = ξ_0 + μ (Θ φ_ξ)_l`, and the periodic states `z, γ, V` have
//! integrands with zero period mean. The objective is the sum of nodal
//! thrusts.

use std::f64::consts::TAU;
use std::sync::Arc;

use faer::MatMut;
use serde::{Deserialize, Serialize};

use crate::edge::{detect_edges, reconstruct, EdgeConfig, EdgeReport, PiecewiseConstant};
use crate::error::{invalid, Error, Result};
use crate::fourier::{EquispacedGrid, FourierInterpolant, IntegrationMatrix};
use crate::nlp::{KktDiagnostics, NlpProblem, NlpSolverHandle, SolveStatus};
use crate::uav::{drag, UavParameters, ALPHA_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    X,
    Z,
    Gamma,
    V,
    Alpha,
    Thrust,
}

impl Block {
    pub const ALL: [Block; 6] = [Block::X, Block::Z, Block::Gamma, Block::V, Block::Alpha, Block::Thrust];

    fn index(self) -> usize {
        self as usize
    }
}

/// Packed `[x; z; γ; V; α; T; T_f]` of length `6N + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    n: usize,
    data: Vec<f64>,
}

impl DecisionVector {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 6 * n + 1 {
            return Err(invalid(format!(
                "decision vector for N = {n} needs {} entries, got {}",
                6 * n + 1,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn pack(
        x: &[f64],
        z: &[f64],
        gamma: &[f64],
        v: &[f64],
        alpha: &[f64],
        thrust: &[f64],
        t_f: f64,
    ) -> Result<Self> {
        let n = x.len();
        if [z, gamma, v, alpha, thrust].iter().any(|b| b.len() != n) {
            return Err(invalid("all blocks must have the same length"));
        }
        let mut data = Vec::with_capacity(6 * n + 1);
        for b in [x, z, gamma, v, alpha, thrust] {
            data.extend_from_slice(b);
        }
        data.push(t_f);
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn block(&self, b: Block) -> &[f64] {
        let o = b.index() * self.n;
        &self.data[o..o + self.n]
    }

    pub fn block_mut(&mut self, b: Block) -> &mut [f64] {
        let o = b.index() * self.n;
        &mut self.data[o..o + self.n]
    }

    pub fn x(&self) -> &[f64] {
        self.block(Block::X)
    }

    pub fn z(&self) -> &[f64] {
        self.block(Block::Z)
    }

    pub fn gamma(&self) -> &[f64] {
        self.block(Block::Gamma)
    }

    pub fn v(&self) -> &[f64] {
        self.block(Block::V)
    }

    pub fn alpha(&self) -> &[f64] {
        self.block(Block::Alpha)
    }

    pub fn thrust(&self) -> &[f64] {
        self.block(Block::Thrust)
    }

    pub fn t_f(&self) -> f64 {
        self.data[6 * self.n]
    }

    pub fn set_t_f(&mut self, t_f: f64) {
        self.data[6 * self.n] = t_f;
    }

    pub fn mu(&self) -> f64 {
        self.t_f() / TAU
    }

    /// Trigonometric re-interpolation onto `n` nodes. The non-periodic `x`
    /// block is rebuilt from its integrand on the new grid.
    pub fn resample(&self, params: &UavParameters, n: usize) -> Result<Self> {
        let grid = EquispacedGrid::natural(self.n)?;
        let mut out = vec![0.0; 6 * n + 1];
        for b in &Block::ALL[1..] {
            let p = FourierInterpolant::new(&grid, self.block(*b))?.resample(n)?;
            let o = b.index() * n;
            out[o..o + n].copy_from_slice(p.values());
        }
        out[6 * n] = self.t_f();
        let mut dv = Self::new(n, out)?;
        dv.rebuild_x(params)?;
        Ok(dv)
    }

    /// Sets `x = x0 + μ Θ (V cos γ)`.
    pub fn rebuild_x(&mut self, params: &UavParameters) -> Result<()> {
        let fim = IntegrationMatrix::natural(self.n)?;
        let phi: Vec<f64> = self.v().iter().zip(self.gamma()).map(|(v, g)| v * g.cos()).collect();
        let q = fim.apply(&phi)?;
        let mu = self.mu();
        for (x, q) in self.block_mut(Block::X).iter_mut().zip(q) {
            *x = params.x0 + mu * q;
        }
        Ok(())
    }
}

/// Closed boxes replacing the strict path inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathBounds {
    pub v_min: f64,
    pub gamma_max: f64,
    pub t_f_min: f64,
    /// Upper bound on the period.
    pub t_f_max: f64,
}

impl Default for PathBounds {
    fn default() -> Self {
        Self {
            v_min: 1.0,
            gamma_max: 1.2,
            t_f_min: 1.0,
            t_f_max: 20.0,
        }
    }
}

/// Integrand values and their nodewise partials.
struct Integrands {
    phi: [Vec<f64>; 4],
}

/// Per-node partial derivatives `(∂γ, ∂V, ∂α, ∂T)` of the four integrands.
#[derive(Clone, Copy)]
struct NodePartials {
    d: [[f64; 4]; 4],
}

/// Equality residuals in the collocation layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub gamma: Vec<f64>,
    pub v: Vec<f64>,
    /// Period-mean conditions for the `z`, `γ` and `V` integrands.
    pub closure: [f64; 3],
}

impl Residuals {
    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.z)
            .chain(&self.gamma)
            .chain(&self.v)
            .chain(&self.closure)
            .fold(0.0_f64, |m, r| m.max(r.abs()))
    }
}

/// The discretized endurance problem for one mesh size.
#[derive(Debug, Clone)]
pub struct TranscribedNlp {
    n: usize,
    params: UavParameters,
    bounds: PathBounds,
    fim: Arc<IntegrationMatrix>,
}

pub fn normalize(params: &UavParameters, n: usize) -> Result<TranscribedNlp> {
    normalize_with(params, n, PathBounds::default())
}

pub fn normalize_with(params: &UavParameters, n: usize, bounds: PathBounds) -> Result<TranscribedNlp> {
    params.validate()?;
    if n < 8 || n % 2 != 0 {
        return Err(invalid(format!("mesh size must be even and at least 8, got {n}")));
    }
    if !(bounds.v_min > 0.0
        && bounds.gamma_max > 0.0
        && bounds.gamma_max < std::f64::consts::FRAC_PI_2
        && bounds.t_f_min > 0.0
        && bounds.t_f_max > bounds.t_f_min)
    {
        return Err(invalid(
            "path bounds must satisfy V_min > 0, 0 < γ_max < π/2, 0 < T_f,min < T_f,max",
        ));
    }
    Ok(TranscribedNlp {
        n,
        params: *params,
        bounds,
        fim: IntegrationMatrix::natural(n)?,
    })
}

/// Level-trim starting point: `V = 27`, `γ = 0`, unit load factor, thrust equal to drag.
pub fn initial_guess(params: &UavParameters, n: usize, t_f_guess: f64) -> Result<DecisionVector> {
    if !(t_f_guess > 0.0 && t_f_guess.is_finite()) {
        return Err(invalid("period guess must be positive"));
    }
    let v = 27.0;
    let alpha = params.trim_alpha(v)?.clamp(-ALPHA_MAX, ALPHA_MAX);
    let thrust = drag(params, v, alpha)?.clamp(0.0, params.t_max);
    let mu = t_f_guess / TAU;
    let grid = EquispacedGrid::natural(n)?;
    let x: Vec<f64> = grid.nodes().iter().map(|tau| params.x0 + v * mu * tau).collect();
    DecisionVector::pack(
        &x,
        &vec![params.z0; n],
        &vec![0.0; n],
        &vec![v; n],
        &vec![alpha; n],
        &vec![thrust; n],
        t_f_guess,
    )
}

impl TranscribedNlp {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &UavParameters {
        &self.params
    }

    pub fn path_bounds(&self) -> &PathBounds {
        &self.bounds
    }

    /// Level-trim starting point for this mesh.
    pub fn initial_guess(&self, t_f_guess: f64) -> Result<DecisionVector> {
        initial_guess(&self.params, self.n, t_f_guess)
    }

    fn offset(&self, b: Block) -> usize {
        b.index() * self.n
    }

    fn integrands(&self, x: &[f64]) -> Integrands {
        let n = self.n;
        let p = &self.params;
        let (c2, c3, c4) = (p.c2(), p.c3(), p.c4());
        let mut phi = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            let g = x[2 * n + k];
            let v = x[3 * n + k];
            let a = x[4 * n + k];
            let t = x[5 * n + k];
            let (s, c) = g.sin_cos();
            let cl = p.lift_coefficient(a);
            phi[0][k] = v * c;
            phi[1][k] = v * s;
            phi[2][k] = c3 * cl * v - p.g * c / v;
            phi[3][k] = (t - c2 * (p.cd0 + cl * cl / c4) * v * v) / p.mass - p.g * s;
        }
        Integrands { phi }
    }

    fn partials(&self, x: &[f64], k: usize) -> NodePartials {
        let n = self.n;
        let p = &self.params;
        let (c2, c3, c4) = (p.c2(), p.c3(), p.c4());
        let g = x[2 * n + k];
        let v = x[3 * n + k];
        let a = x[4 * n + k];
        let (s, c) = g.sin_cos();
        let cl = p.lift_coefficient(a);
        let cd = p.cd0 + cl * cl / c4;
        NodePartials {
            d: [
                [-v * s, c, 0.0, 0.0],
                [v * c, s, 0.0, 0.0],
                [p.g * s / v, c3 * cl + p.g * c / (v * v), c3 * p.cl_alpha * v, 0.0],
                [
                    -p.g * c,
                    -2.0 * c2 * cd * v / p.mass,
                    -2.0 * c2 * cl * p.cl_alpha * v * v / (c4 * p.mass),
                    1.0 / p.mass,
                ],
            ],
        }
    }

    /// Full residual set, including the identically zero first rows of the
    /// `γ` and `V` blocks.
    pub fn residuals(&self, dv: &DecisionVector) -> Result<Residuals> {
        if dv.n() != self.n {
            return Err(invalid("decision vector mesh size does not match"));
        }
        let x = dv.as_slice();
        let n = self.n;
        let mu = dv.mu();
        let phi = self.integrands(x).phi;
        let anchors = [self.params.x0, self.params.z0, x[2 * n], x[3 * n]];
        let mut blocks: [Vec<f64>; 4] = Default::default();
        for b in 0..4 {
            let q = self.fim.apply(&phi[b])?;
            blocks[b] = (0..n).map(|l| x[b * n + l] - mu * q[l] - anchors[b]).collect();
        }
        let w = TAU / n as f64;
        let closure = [1, 2, 3].map(|b| w * phi[b].iter().sum::<f64>());
        let [bx, bz, bg, bv] = blocks;
        Ok(Residuals {
            x: bx,
            z: bz,
            gamma: bg,
            v: bv,
            closure,
        })
    }

    /// `J̄ = Σ T_k`.
    pub fn scaled_objective(&self, dv: &DecisionVector) -> f64 {
        dv.thrust().iter().sum()
    }

    /// Mean fuel rate `J = (σ/N) J̄`, kg/s.
    pub fn performance_index(&self, dv: &DecisionVector) -> f64 {
        self.params.sigma / self.n as f64 * self.scaled_objective(dv)
    }

    /// Constraint row of residual `l` of state block `b` (0..4), `None` for
    /// the dropped identically zero rows.
    fn row_of(&self, b: usize, l: usize) -> Option<usize> {
        let n = self.n;
        match b {
            0 | 1 => Some(b * n + l),
            2 => (l > 0).then(|| 2 * n + l - 1),
            _ => (l > 0).then(|| 3 * n - 1 + l - 1),
        }
    }

    fn closure_row(&self, i: usize) -> usize {
        4 * self.n - 2 + i
    }

    /// Bound vectors per block.
    pub fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut lo = vec![f64::NEG_INFINITY; 6 * n + 1];
        let mut up = vec![f64::INFINITY; 6 * n + 1];
        for k in 0..n {
            lo[2 * n + k] = -self.bounds.gamma_max;
            up[2 * n + k] = self.bounds.gamma_max;
            lo[3 * n + k] = self.bounds.v_min;
            lo[4 * n + k] = -ALPHA_MAX;
            up[4 * n + k] = ALPHA_MAX;
            lo[5 * n + k] = 0.0;
            up[5 * n + k] = self.params.t_max;
        }
        lo[6 * n] = self.bounds.t_f_min;
        up[6 * n] = self.bounds.t_f_max;
        (lo, up)
    }
}

impl NlpProblem for TranscribedNlp {
    fn num_variables(&self) -> usize {
        6 * self.n + 1
    }

    fn num_constraints(&self) -> usize {
        4 * self.n + 1
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.variable_bounds()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        x[5 * self.n..6 * self.n].iter().sum()
    }

    fn gradient(&self, _: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        grad[5 * self.n..6 * self.n].fill(1.0);
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        let n = self.n;
        let mu = x[6 * n] / TAU;
        let phi = self.integrands(x).phi;
        let anchors = [self.params.x0, self.params.z0, x[2 * n], x[3 * n]];
        for b in 0..4 {
            let q = self.fim.apply(&phi[b]).expect("integrand length matches FIM order");
            for l in 0..n {
                if let Some(r) = self.row_of(b, l) {
                    c[r] = x[b * n + l] - mu * q[l] - anchors[b];
                }
            }
        }
        let w = TAU / n as f64;
        for i in 0..3 {
            c[self.closure_row(i)] = w * phi[i + 1].iter().sum::<f64>();
        }
    }

    fn jacobian(&self, x: &[f64], mut jac: MatMut<'_, f64>) {
        let n = self.n;
        let mu = x[6 * n] / TAU;
        let phi = self.integrands(x).phi;
        let parts: Vec<NodePartials> = (0..n).map(|k| self.partials(x, k)).collect();
        let theta = self.fim.entries();
        let var_offsets = [
            self.offset(Block::Gamma),
            self.offset(Block::V),
            self.offset(Block::Alpha),
            self.offset(Block::Thrust),
        ];
        let w = TAU / n as f64;
        for b in 0..4 {
            // block identity and anchor columns
            for l in 0..n {
                if let Some(r) = self.row_of(b, l) {
                    jac[(r, b * n + l)] += 1.0;
                    if b >= 2 {
                        jac[(r, b * n)] -= 1.0;
                    }
                }
            }
            for (vi, &vo) in var_offsets.iter().enumerate() {
                for k in 0..n {
                    let d = parts[k].d[b][vi];
                    if d == 0.0 {
                        continue;
                    }
                    let col = vo + k;
                    for l in 0..n {
                        if let Some(r) = self.row_of(b, l) {
                            jac[(r, col)] -= mu * theta[l * n + k] * d;
                        }
                    }
                    if b >= 1 {
                        jac[(self.closure_row(b - 1), col)] += w * d;
                    }
                }
            }
            let q = self.fim.apply(&phi[b]).expect("integrand length matches FIM order");
            for l in 0..n {
                if let Some(r) = self.row_of(b, l) {
                    jac[(r, 6 * n)] = -q[l] / TAU;
                }
            }
        }
    }

    fn hessian(&self, x: &[f64], _obj_factor: f64, y: &[f64], mut hess: MatMut<'_, f64>) {
        let n = self.n;
        let p = &self.params;
        let mu = x[6 * n] / TAU;
        let (c2, c3, c4) = (p.c2(), p.c3(), p.c4());
        let w = TAU / n as f64;
        // u_b = Θᵀ λ_b per state block
        let mut u: [Vec<f64>; 4] = Default::default();
        for b in 0..4 {
            let lam: Vec<f64> = (0..n).map(|l| self.row_of(b, l).map_or(0.0, |r| y[r])).collect();
            u[b] = self
                .fim
                .apply_transpose(&lam)
                .expect("multiplier length matches FIM order");
        }
        let closure = [
            0.0,
            y[self.closure_row(0)],
            y[self.closure_row(1)],
            y[self.closure_row(2)],
        ];
        let (ig, iv, ia, it, itf) = (2 * n, 3 * n, 4 * n, 5 * n, 6 * n);
        for k in 0..n {
            let g = x[ig + k];
            let v = x[iv + k];
            let a = x[ia + k];
            let (s, c) = g.sin_cos();
            let cl = p.lift_coefficient(a);
            let cd = p.cd0 + cl * cl / c4;
            let om: [f64; 4] = std::array::from_fn(|b| -mu * u[b][k] + w * closure[b]);
            // second partials (γγ, Vγ, VV, αV, αα) of each integrand
            let h = [
                [-v * c, -s, 0.0, 0.0, 0.0],
                [-v * s, c, 0.0, 0.0, 0.0],
                [
                    p.g * c / v,
                    -p.g * s / (v * v),
                    -2.0 * p.g * c / (v * v * v),
                    c3 * p.cl_alpha,
                    0.0,
                ],
                [
                    p.g * s,
                    0.0,
                    -2.0 * c2 * cd / p.mass,
                    -4.0 * c2 * cl * p.cl_alpha * v / (c4 * p.mass),
                    -2.0 * c2 * p.cl_alpha * p.cl_alpha * v * v / (c4 * p.mass),
                ],
            ];
            let mut acc = [0.0; 5];
            for b in 0..4 {
                for (e, hv) in acc.iter_mut().zip(&h[b]) {
                    *e += om[b] * hv;
                }
            }
            hess[(ig + k, ig + k)] += acc[0];
            hess[(iv + k, ig + k)] += acc[1];
            hess[(iv + k, iv + k)] += acc[2];
            hess[(ia + k, iv + k)] += acc[3];
            hess[(ia + k, ia + k)] += acc[4];
            // T_f couples through μ
            let d = self.partials(x, k).d;
            for (vi, col) in [ig + k, iv + k, ia + k, it + k].into_iter().enumerate() {
                let e: f64 = (0..4).map(|b| -u[b][k] / TAU * d[b][vi]).sum();
                hess[(itf, col)] += e;
            }
        }
    }

    fn objective_scaling(&self) -> Option<f64> {
        Some(1.0 / self.n as f64)
    }
}

/// Outcome of one mesh solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSolution {
    pub solution: DecisionVector,
    pub status: SolveStatus,
    pub iterations: usize,
    pub diagnostics: KktDiagnostics,
}

pub fn solve_mesh(
    nlp: &TranscribedNlp,
    warm_start: Option<&DecisionVector>,
    solver: &NlpSolverHandle,
) -> Result<MeshSolution> {
    let start = match warm_start {
        Some(w) if w.n() == nlp.n => w.clone(),
        Some(w) => w.resample(&nlp.params, nlp.n)?,
        None => nlp.initial_guess(10.0)?,
    };
    let res = solver.minimize(nlp, start.as_slice())?;
    Ok(MeshSolution {
        solution: DecisionVector::new(nlp.n, res.x)?,
        status: res.status,
        iterations: res.iterations,
        diagnostics: res.diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub n_in: usize,
    pub n_inc: usize,
    pub epsilon: f64,
    pub max_meshes: usize,
    pub t_f_guess: f64,
    pub edge: EdgeConfig,
    pub bounds: PathBounds,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            n_in: 150,
            n_inc: 50,
            epsilon: 0.01,
            max_meshes: 4,
            t_f_guess: 10.0,
            edge: EdgeConfig::default(),
            bounds: PathBounds::default(),
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_in < 8 || self.n_in % 2 != 0 {
            return Err(invalid("N_in must be even and at least 8"));
        }
        if self.n_inc < 2 || self.n_inc % 2 != 0 {
            return Err(invalid("N_inc must be even and at least 2"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon must be positive"));
        }
        if self.max_meshes == 0 {
            return Err(invalid("max_meshes must be at least 1"));
        }
        if !(self.t_f_guess > 0.0) {
            return Err(invalid("period guess must be positive"));
        }
        let n_last = self.n_in + (self.max_meshes - 1) * self.n_inc;
        self.edge.validate(n_last)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRecord {
    pub n: usize,
    pub t_f: f64,
    pub j_bar: f64,
    pub j: f64,
    pub status: SolveStatus,
    pub feasibility: f64,
    pub stationarity: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub params: UavParameters,
    pub history: Vec<MeshRecord>,
    /// Stopping rule met and the final mesh solve converged.
    pub converged: bool,
    pub solution: DecisionVector,
    pub j: f64,
    pub t_f: f64,
    pub gamma0: f64,
    pub v0: f64,
    /// Edge report in normalized time.
    pub edges: EdgeReport,
    /// Thrust switch times in physical time, s.
    pub switch_times: Vec<f64>,
    /// Corrected two-level thrust on `[0, T_f]`.
    pub corrected_thrust: PiecewiseConstant,
}

/// Mesh-refinement driver starting from the level-trim guess.
pub fn refine(params: &UavParameters, config: &RefineConfig, solver: &NlpSolverHandle) -> Result<SolveReport> {
    config.validate()?;
    let start = initial_guess(params, config.n_in, config.t_f_guess)?;
    refine_from(params, config, solver, start)
}

/// Mesh-refinement driver from a caller-supplied starting point, which is
/// re-interpolated onto the first mesh when sizes differ.
pub fn refine_from(
    params: &UavParameters,
    config: &RefineConfig,
    solver: &NlpSolverHandle,
    start: DecisionVector,
) -> Result<SolveReport> {
    config.validate()?;
    let mut history = Vec::new();
    let mut warm = start;
    let mut stop = false;
    let mut last_status = SolveStatus::IterationLimit;
    // later meshes restart close to the previous optimum
    let mut warm_solver = solver.clone();
    warm_solver.options = solver.options.warm();
    for k in 0..config.max_meshes {
        let n = config.n_in + k * config.n_inc;
        let nlp = normalize_with(params, n, config.bounds)?;
        let sol = solve_mesh(&nlp, Some(&warm), if k == 0 { solver } else { &warm_solver })?;
        let dv = sol.solution;
        history.push(MeshRecord {
            n,
            t_f: dv.t_f(),
            j_bar: nlp.scaled_objective(&dv),
            j: nlp.performance_index(&dv),
            status: sol.status.clone(),
            feasibility: sol.diagnostics.equality_residual_norm,
            stationarity: sol.diagnostics.scaled_stationarity,
            iterations: sol.iterations,
        });
        last_status = sol.status;
        warm = dv;
        if let [.., a, b] = history.as_slice() {
            if (b.t_f - a.t_f).abs() < config.epsilon {
                stop = true;
                break;
            }
        }
    }
    let solution = warm;
    let n = solution.n();
    let grid = EquispacedGrid::natural(n)?;
    let thrust = FourierInterpolant::new(&grid, solution.thrust())?;
    let edges = detect_edges(&thrust, &config.edge, Some((0.0, params.t_max)))?;
    let mu = solution.mu();
    let corrected_tau = reconstruct(&thrust, &edges)?;
    let switch_times: Vec<f64> = edges.ad_points.iter().map(|t| mu * t).collect();
    let corrected_thrust = PiecewiseConstant::new(
        solution.t_f(),
        corrected_tau.switches().iter().map(|t| mu * t).collect(),
        corrected_tau.values().to_vec(),
    )?;
    let last = history.last().expect("at least one mesh");
    Ok(SolveReport {
        params: *params,
        converged: (stop || config.max_meshes == 1) && last_status.is_converged(),
        j: last.j,
        t_f: solution.t_f(),
        gamma0: solution.gamma()[0],
        v0: solution.v()[0],
        history,
        solution,
        edges,
        switch_times,
        corrected_thrust,
    })
}

/// Trajectory samples in physical time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub gamma: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: Vec<f64>,
    pub thrust: Vec<f64>,
}

/// Evaluates the Fourier interpolants of a solution at physical times in
/// `[0, T_f]`. `x` comes from the running integral of its integrand.
pub fn sample_physical(params: &UavParameters, solution: &DecisionVector, times: &[f64]) -> Result<Trajectory> {
    let t_f = solution.t_f();
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t <= t_f)) {
        return Err(invalid(format!("time {t} lies outside [0, {t_f}]")));
    }
    let n = solution.n();
    let grid = EquispacedGrid::natural(n)?;
    let mu = solution.mu();
    let interp = |b: Block| FourierInterpolant::new(&grid, solution.block(b));
    let (z, g, v, a, th) = (
        interp(Block::Z)?,
        interp(Block::Gamma)?,
        interp(Block::V)?,
        interp(Block::Alpha)?,
        interp(Block::Thrust)?,
    );
    let phi_x: Vec<f64> = solution
        .v()
        .iter()
        .zip(solution.gamma())
        .map(|(v, g)| v * g.cos())
        .collect();
    let ix = FourierInterpolant::new(&grid, &phi_x)?;
    let taus: Vec<f64> = times.iter().map(|t| t / mu).collect();
    Ok(Trajectory {
        t: times.to_vec(),
        x: taus
            .iter()
            .map(|&s| params.x0 + mu * ix.integral_from_zero(s))
            .collect(),
        z: z.evaluate_many(&taus),
        gamma: g.evaluate_many(&taus),
        v: v.evaluate_many(&taus),
        alpha: a.evaluate_many(&taus),
        thrust: th.evaluate_many(&taus),
    })
}

/// Errors if a report's corrected thrust is not a two-level signal on `{0, T_max}`.
pub fn check_bang_bang(report: &SolveReport) -> Result<()> {
    let levels = report.corrected_thrust.values();
    let t_max = report.params.t_max;
    if levels.iter().any(|v| *v != 0.0 && *v != t_max) {
        return Err(Error::Structural("corrected thrust leaves {0, T_max}".into()));
    }
    if report.switch_times.len() % 2 != 0 {
        return Err(Error::Structural("odd number of thrust switches".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::check_jacobian;
    use faer::Mat;

    fn p() -> UavParameters {
        UavParameters::default()
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let n = 8;
        let blocks: Vec<Vec<f64>> = (0..6).map(|b| (0..n).map(|k| (b * 10 + k) as f64).collect()).collect();
        let dv = DecisionVector::pack(
            &blocks[0], &blocks[1], &blocks[2], &blocks[3], &blocks[4], &blocks[5], 9.5,
        )
        .unwrap();
        assert_eq!(dv.as_slice().len(), 6 * n + 1);
        for (b, want) in Block::ALL.iter().zip(&blocks) {
            assert_eq!(dv.block(*b), want.as_slice());
        }
        assert_eq!(dv.t_f(), 9.5);
        let again = DecisionVector::new(n, dv.clone().into_vec()).unwrap();
        assert_eq!(again, dv);
        assert!(DecisionVector::new(n, vec![0.0; 6 * n]).is_err());
    }

    #[test]
    fn level_trim_is_a_fixed_point() {
        let nlp = normalize(&p(), 32).unwrap();
        let dv = nlp.initial_guess(10.0).unwrap();
        let r = nlp.residuals(&dv).unwrap();
        assert!(r.max_abs() < 1e-10, "{}", r.max_abs());
        assert!((dv.alpha()[0] - 0.0698).abs() < 1e-3);
        let (lo, up) = nlp.variable_bounds();
        assert!(dv
            .as_slice()
            .iter()
            .zip(lo.iter().zip(&up))
            .all(|(x, (l, u))| x >= l && x <= u));
    }

    #[test]
    fn constant_thrust_objective_identity() {
        let nlp = normalize(&p(), 100).unwrap();
        let mut dv = nlp.initial_guess(10.0).unwrap();
        dv.block_mut(Block::Thrust).fill(140.0);
        assert!((nlp.scaled_objective(&dv) - 14000.0).abs() < 1e-9);
        assert!((nlp.performance_index(&dv) - 1.68).abs() < 1e-12);
    }

    #[test]
    fn anchored_rows_vanish_identically() {
        let nlp = normalize(&p(), 16).unwrap();
        let mut dv = nlp.initial_guess(10.0).unwrap();
        for (k, g) in dv.block_mut(Block::Gamma).iter_mut().enumerate() {
            *g = 0.3 * (k as f64).sin();
        }
        dv.block_mut(Block::V)[0] = 19.0;
        let r = nlp.residuals(&dv).unwrap();
        assert_eq!(r.gamma[0], 0.0);
        assert_eq!(r.v[0], 0.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let nlp = normalize(&p(), 16).unwrap();
        let mut dv = nlp.initial_guess(10.0).unwrap();
        // move off the trim point so every partial is exercised
        for k in 0..16 {
            let s = (k as f64 * 0.7).sin();
            dv.block_mut(Block::Gamma)[k] = 0.05 * s;
            dv.block_mut(Block::V)[k] += 2.0 * s;
            dv.block_mut(Block::Alpha)[k] += 0.03 * (k as f64).cos();
            dv.block_mut(Block::Thrust)[k] += 5.0 * s;
        }
        let dev = check_jacobian(&nlp, dv.as_slice(), 1e-6).unwrap();
        assert!(dev < 1e-5, "{dev}");
        let dev = check_jacobian(&nlp, nlp.initial_guess(10.0).unwrap().as_slice(), 1e-6).unwrap();
        assert!(dev < 1e-5, "{dev}");
    }

    #[test]
    fn hessian_matches_finite_differences_of_jacobian() {
        let n = 8;
        let nlp = normalize(&p(), n).unwrap();
        let mut dv = nlp.initial_guess(9.0).unwrap();
        for k in 0..n {
            let s = (k as f64 * 1.3).sin();
            dv.block_mut(Block::Gamma)[k] = 0.1 * s;
            dv.block_mut(Block::V)[k] += 3.0 * s;
            dv.block_mut(Block::Alpha)[k] += 0.05 * (k as f64).cos();
        }
        let x = dv.as_slice().to_vec();
        let nv = nlp.num_variables();
        let m = nlp.num_constraints();
        let y: Vec<f64> = (0..m).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let mut h = Mat::<f64>::zeros(nv, nv);
        nlp.hessian(&x, 1.0, &y, h.as_mut());
        let grad_lag = |x: &[f64]| -> Vec<f64> {
            let mut j = Mat::<f64>::zeros(m, nv);
            nlp.jacobian(x, j.as_mut());
            (0..nv).map(|c| (0..m).map(|r| j[(r, c)] * y[r]).sum()).collect()
        };
        let step = 1e-6;
        let mut worst = 0.0_f64;
        for c in 0..nv {
            let mut xp = x.clone();
            xp[c] += step;
            let mut xm = x.clone();
            xm[c] -= step;
            let (gp, gm) = (grad_lag(&xp), grad_lag(&xm));
            for r in c..nv {
                let fd = (gp[r] - gm[r]) / (2.0 * step);
                worst = worst.max((fd - h[(r, c)]).abs() / fd.abs().max(1.0));
            }
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn resampling_preserves_fixed_point() {
        let nlp = normalize(&p(), 16).unwrap();
        let dv = nlp.initial_guess(10.0).unwrap();
        let fine = dv.resample(&p(), 24).unwrap();
        let r = normalize(&p(), 24).unwrap().residuals(&fine).unwrap();
        assert!(r.max_abs() < 1e-10);
    }

    #[test]
    fn invalid_setups_are_rejected() {
        assert!(normalize(&p(), 7).is_err());
        assert!(normalize(&p(), 6).is_err());
        let bad = UavParameters { t_max: -5.0, ..p() };
        assert!(normalize(&bad, 16).is_err());
        assert!(initial_guess(&p(), 16, 0.0).is_err());
    }

    #[test]
    fn physical_sampling_hits_nodes() {
        let dv = initial_guess(&p(), 16, 10.0).unwrap();
        let grid = EquispacedGrid::natural(16).unwrap();
        let times: Vec<f64> = grid.nodes().iter().map(|t| t * dv.mu()).collect();
        let tr = sample_physical(&p(), &dv, &times).unwrap();
        for k in 0..16 {
            assert!((tr.x[k] - dv.x()[k]).abs() < 1e-9);
            assert!((tr.v[k] - dv.v()[k]).abs() < 1e-12);
        }
        assert!(sample_physical(&p(), &dv, &[10.5]).is_err());
    }
}

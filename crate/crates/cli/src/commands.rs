use std::fs;
use std::path::Path;
use std::sync::Arc;

use fipsed::edge::signals;
use fipsed::nlp::{IterationLog, NlpSolverHandle};
use fipsed::rates::{algebraic_study, geometric_study, AlgebraicStudy, GeometricStudy, SMOOTHNESS_ORDERS};
use fipsed::transcription::{
    check_bang_bang, initial_guess, refine_from, sample_physical, Block, MeshRecord, RefineConfig, SolveReport,
};
use fipsed::uav::{sensitivity_table, SensitivityTable, UavParameters, ALPHA_MAX};
use fipsed::{
    detect_edges, reconstruct, EdgeConfig, EdgeReport, EquispacedGrid, FourierInterpolant, IntegrationMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{RunConfig, SolverConfig};
use crate::output::{plot_script, write_columns, write_json};
use crate::CliError;

/// Switches this close to either end of the horizon count toward a boundary pair, s.
pub const BOUNDARY_WINDOW: f64 = 1.0;
/// Relative size of the random kick applied to α and T before a retry.
const RETRY_PERTURBATION: f64 = 0.05;
const DENSE_SAMPLES: usize = 2001;

#[derive(Debug, Serialize)]
struct BoundaryCheck {
    window: f64,
    switches_near_start: usize,
    switches_near_end: usize,
    /// No switch pair was found at one end of the horizon.
    unresolved: bool,
}

impl BoundaryCheck {
    fn new(switches: &[f64], t_f: f64) -> Self {
        let near_start = switches.iter().filter(|t| **t <= BOUNDARY_WINDOW).count();
        let near_end = switches.iter().filter(|t| **t >= t_f - BOUNDARY_WINDOW).count();
        Self {
            window: BOUNDARY_WINDOW,
            switches_near_start: near_start,
            switches_near_end: near_end,
            unresolved: near_start < 2 || near_end < 2,
        }
    }
}

#[derive(Debug, Serialize)]
struct UavReport<'a> {
    status: &'static str,
    error: Option<String>,
    attempts: usize,
    seed: u64,
    #[serde(rename = "J")]
    j: Option<f64>,
    #[serde(rename = "T_f")]
    t_f: Option<f64>,
    gamma0: Option<f64>,
    v0: Option<f64>,
    switch_times: Vec<f64>,
    /// Why the corrected thrust is not a `{0, T_max}` profile, if it is not.
    bang_bang_issue: Option<String>,
    boundary: Option<BoundaryCheck>,
    history: Vec<MeshRecord>,
    edges: Option<EdgeReport>,
    params: &'a UavParameters,
    mesh: &'a RefineConfig,
    solver: &'a SolverConfig,
}

fn solver_handle(cfg: &RunConfig) -> Result<NlpSolverHandle, CliError> {
    let handle = NlpSolverHandle::new(cfg.solver.options())?;
    Ok(if cfg.verbose {
        handle.with_logger(Arc::new(|entry: &IterationLog| {
            if let Ok(line) = serde_json::to_string(entry) {
                eprintln!("{line}");
            }
        }))
    } else {
        handle
    })
}

fn perturb(start: &mut fipsed::transcription::DecisionVector, params: &UavParameters, rng: &mut ChaCha8Rng) {
    for a in start.block_mut(Block::Alpha) {
        *a = (*a * (1.0 + RETRY_PERTURBATION * rng.gen_range(-1.0..1.0))).clamp(-ALPHA_MAX, ALPHA_MAX);
    }
    for t in start.block_mut(Block::Thrust) {
        *t = (*t * (1.0 + RETRY_PERTURBATION * rng.gen_range(-1.0..1.0))).clamp(0.0, params.t_max);
    }
}

fn write_trajectory(out: &Path, report: &SolveReport) -> Result<(), CliError> {
    let dv = &report.solution;
    let (n, t_f) = (dv.n(), dv.t_f());
    let t: Vec<f64> = (0..n).map(|j| t_f * j as f64 / n as f64).collect();
    let corrected: Vec<f64> = t.iter().map(|&s| report.corrected_thrust.evaluate(s)).collect();
    write_columns(
        &out.join("trajectory.csv"),
        &["t", "x", "z", "gamma", "V", "alpha", "T_predicted", "T_corrected"],
        &[
            &t,
            dv.x(),
            dv.z(),
            dv.gamma(),
            dv.v(),
            dv.alpha(),
            dv.thrust(),
            &corrected,
        ],
    )?;
    let dense: Vec<f64> = (0..DENSE_SAMPLES)
        .map(|i| t_f * i as f64 / (DENSE_SAMPLES - 1) as f64)
        .collect();
    let traj = sample_physical(&report.params, dv, &dense)?;
    let corrected: Vec<f64> = dense.iter().map(|&s| report.corrected_thrust.evaluate(s)).collect();
    write_columns(
        &out.join("thrust_corrected.csv"),
        &["t", "T_predicted", "T_corrected"],
        &[&dense, &traj.thrust, &corrected],
    )?;
    fs::write(out.join("trajectory.gp"), plot_script(t_f))
        .map_err(|e| CliError::Config(format!("cannot write plot script: {e}")))
}

pub fn solve_uav(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.uav.validate()?;
    cfg.mesh.validate()?;
    let solver = solver_handle(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut last: Option<SolveReport> = None;
    let mut error = None;
    let mut attempts = 0;
    for attempt in 0..=cfg.retries {
        attempts += 1;
        let mut start = initial_guess(&cfg.uav, cfg.mesh.n_in, cfg.mesh.t_f_guess)?;
        if attempt > 0 {
            perturb(&mut start, &cfg.uav, &mut rng);
        }
        match refine_from(&cfg.uav, &cfg.mesh, &solver, start) {
            Ok(r) => {
                let done = r.converged;
                last = Some(r);
                error = None;
                if done {
                    break;
                }
            }
            Err(fipsed::Error::Solver(msg)) => error = Some(msg),
            Err(e) => return Err(e.into()),
        }
    }

    let converged = last.as_ref().is_some_and(|r| r.converged);
    let issue = last.as_ref().and_then(|r| check_bang_bang(r).err());
    if let Some(r) = &last {
        write_trajectory(out, r)?;
    }
    let report = UavReport {
        status: if converged { "converged" } else { "unconverged" },
        error: error.clone(),
        attempts,
        seed: cfg.seed,
        j: last.as_ref().map(|r| r.j),
        t_f: last.as_ref().map(|r| r.t_f),
        gamma0: last.as_ref().map(|r| r.gamma0),
        v0: last.as_ref().map(|r| r.v0),
        switch_times: last.as_ref().map_or_else(Vec::new, |r| r.switch_times.clone()),
        bang_bang_issue: issue.map(|e| e.to_string()),
        boundary: last.as_ref().map(|r| BoundaryCheck::new(&r.switch_times, r.t_f)),
        history: last.as_ref().map_or_else(Vec::new, |r| r.history.clone()),
        edges: last.as_ref().map(|r| r.edges.clone()),
        params: &cfg.uav,
        mesh: &cfg.mesh,
        solver: &cfg.solver,
    };
    write_json(&out.join("report.json"), &report)?;

    if let (Some(j), Some(t_f)) = (report.j, report.t_f) {
        let sw: Vec<String> = report.switch_times.iter().map(|t| format!("{t:.4}")).collect();
        println!("status   {}", report.status);
        println!("J        {j:.6} kg/s");
        println!("T_f      {t_f:.6} s");
        println!("switches [{}]", sw.join(", "));
        if let Some(issue) = &report.bang_bang_issue {
            println!("warning  {issue}");
        }
        if let Some(b) = &report.boundary {
            if b.unresolved {
                println!(
                    "warning  no switch pair within {} s of at least one end of the horizon",
                    b.window
                );
            }
        }
    }
    if converged {
        Ok(())
    } else {
        Err(CliError::Unconverged(
            error.unwrap_or_else(|| "mesh refinement did not converge".into()),
        ))
    }
}

#[derive(Debug, Serialize)]
struct BenchRow {
    function: String,
    ad_points: Vec<f64>,
    true_switches: Vec<f64>,
    /// `None` when the number of detected points differs from the truth.
    mae: Option<f64>,
    report: EdgeReport,
}

pub fn edge_bench(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let b = &cfg.edge_bench;
    let edge = EdgeConfig::new(b.fine_grid_size, b.epsilon_tilde, b.r1, b.r2)?;
    let grid = EquispacedGrid::natural(b.n)?;
    let mut rows = Vec::new();
    for name in &b.functions {
        let sig = signals::by_name(name).ok_or_else(|| CliError::Config(format!("unknown test function '{name}'")))?;
        let samples: Vec<f64> = grid.nodes().iter().map(|&t| sig.evaluate(t)).collect();
        let interp = FourierInterpolant::new(&grid, &samples)?;
        let report = detect_edges(&interp, &edge, None)?;
        let rebuilt = reconstruct(&interp, &report)?;
        let t: Vec<f64> = (0..DENSE_SAMPLES)
            .map(|i| interp.period() * i as f64 / (DENSE_SAMPLES - 1) as f64)
            .collect();
        let truth: Vec<f64> = t.iter().map(|&s| sig.evaluate(s)).collect();
        let corrected: Vec<f64> = t.iter().map(|&s| rebuilt.evaluate(s)).collect();
        write_columns(
            &out.join(format!("edge_{name}.csv")),
            &["t", "true", "interpolant", "corrected"],
            &[&t, &truth, &interp.evaluate_many(&t), &corrected],
        )?;
        rows.push(BenchRow {
            function: name.clone(),
            ad_points: report.ad_points.clone(),
            true_switches: sig.switches().to_vec(),
            mae: report.max_abs_error(sig.switches()),
            report,
        });
    }
    write_json(&out.join("edge_bench.json"), &rows)?;

    let path = out.join("edge_bench.csv");
    let werr = |e: csv::Error| CliError::Config(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(werr)?;
    w.write_record(["function", "ad_points", "mae"]).map_err(werr)?;
    println!("{:<10} {:<48} MAE", "function", "AD points");
    for r in &rows {
        let pts: Vec<String> = r.ad_points.iter().map(|p| crate::output::fmt17(*p)).collect();
        let mae = r.mae.map_or_else(|| "count mismatch".to_string(), crate::output::fmt17);
        w.write_record([r.function.as_str(), &pts.join(";"), &mae])
            .map_err(werr)?;
        let short: Vec<String> = r.ad_points.iter().map(|p| format!("{p:.4}")).collect();
        let mae_short = r
            .mae
            .map_or_else(|| "count mismatch".to_string(), |m| format!("{m:.4e}"));
        println!("{:<10} {:<48} {mae_short}", r.function, short.join(", "));
    }
    w.flush().map_err(|e| CliError::Config(e.to_string()))?;

    match rows.iter().find(|r| r.mae.is_none()) {
        Some(r) => Err(CliError::Structural(format!(
            "{}: detected {} switch points, expected {}",
            r.function,
            r.ad_points.len(),
            r.true_switches.len()
        ))),
        None => Ok(()),
    }
}

pub fn sensitivity(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let s = &cfg.sensitivity;
    let table: SensitivityTable = sensitivity_table(s.sigma, s.mass, s.t_f, s.lambda, &s.s_m)?;
    let col = |f: fn(&fipsed::uav::SensitivityRow) -> f64| table.rows.iter().map(f).collect::<Vec<f64>>();
    write_columns(
        &out.join("sensitivity.csv"),
        &["s_m", "phi", "phi_perturbed", "relative_change", "amplification"],
        &[
            &col(|r| r.s_m),
            &col(|r| r.phi),
            &col(|r| r.phi_perturbed),
            &col(|r| r.relative_change),
            &col(|r| r.amplification),
        ],
    )?;
    write_json(&out.join("sensitivity.json"), &table)?;
    println!(
        "lambda {} -> {}, relative change {:.3e}",
        table.lambda, table.lambda_perturbed, table.input_relative_change
    );
    println!("{:>8} {:>8} {:>8} {:>14}", "s_m", "phi", "phi'", "amplification");
    for r in &table.rows {
        println!(
            "{:>8.0e} {:>8.1} {:>8.1} {:>14.1}",
            r.s_m, r.phi, r.phi_perturbed, r.amplification
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ConvergenceReport {
    geometric: GeometricStudy,
    algebraic: Vec<AlgebraicStudy>,
}

pub fn fim_convergence(cfg: &RunConfig, out: &Path, dump: Option<usize>) -> Result<(), CliError> {
    let c = &cfg.convergence;
    let geometric = geometric_study(c.step, c.max_n, c.floor)?;
    let sizes = c.algebraic_sizes()?;
    let algebraic = SMOOTHNESS_ORDERS
        .iter()
        .map(|&s| algebraic_study(s, &sizes))
        .collect::<fipsed::Result<Vec<_>>>()?;

    let n: Vec<f64> = geometric.sizes.iter().map(|&k| k as f64).collect();
    // the first size has no predecessor
    let ratios: Vec<f64> = std::iter::once(f64::NAN)
        .chain(geometric.ratios.iter().copied())
        .collect();
    let ratios = &ratios[..n.len()];
    write_columns(
        &out.join("geometric.csv"),
        &["N", "error", "ratio"],
        &[&n, &geometric.errors, ratios],
    )?;
    let sizes_f: Vec<f64> = sizes.iter().map(|&k| k as f64).collect();
    let mut header = vec!["N".to_string()];
    let mut cols: Vec<&[f64]> = vec![&sizes_f];
    for a in &algebraic {
        header.push(format!("interpolation_s{}", a.s));
        header.push(format!("quadrature_s{}", a.s));
        cols.push(&a.interpolation_errors);
        cols.push(&a.quadrature_errors);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_columns(&out.join("algebraic.csv"), &header, &cols)?;

    println!(
        "analytic test: error {:.3e} at N = {}",
        geometric.errors.last().copied().unwrap_or(f64::NAN),
        geometric.sizes.last().copied().unwrap_or(0)
    );
    println!(
        "{:>3} {:>10} {:>14} {:>12}",
        "s", "predicted", "interpolation", "quadrature"
    );
    for a in &algebraic {
        println!(
            "{:>3} {:>10.3} {:>14.3} {:>12.3}",
            a.s, a.predicted_order, a.interpolation_order, a.quadrature_order
        );
    }
    write_json(
        &out.join("convergence.json"),
        &ConvergenceReport { geometric, algebraic },
    )?;

    if let Some(n) = dump {
        let fim = IntegrationMatrix::natural(n)?;
        let path = out.join(format!("fim_{n}.csv"));
        let file =
            fs::File::create(&path).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        fim.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

pub struct DetectArgs<'a> {
    pub input: &'a Path,
    pub period: Option<f64>,
    pub levels: Option<(f64, f64)>,
}

/// Relative tolerance on the spacing of input sample times.
const SPACING_TOL: f64 = 1e-9;

pub fn detect(cfg: &RunConfig, out: &Path, args: &DetectArgs<'_>) -> Result<(), CliError> {
    let (t, v) = crate::output::read_samples(args.input)?;
    let n = t.len();
    if n < 4 || n % 2 != 0 {
        return Err(CliError::Config(format!(
            "need an even number of at least 4 samples, got {n}"
        )));
    }
    let period = match args.period {
        Some(p) => p,
        None => (t[n - 1] - t[0]) * n as f64 / (n - 1) as f64,
    };
    let grid = EquispacedGrid::new(period, n)?;
    if t.iter()
        .zip(grid.nodes())
        .any(|(a, b)| (a - b).abs() > SPACING_TOL * period)
    {
        return Err(CliError::Config(format!(
            "sample times must be t_j = j T / N starting at 0 with T = {period}"
        )));
    }
    let interp = FourierInterpolant::new(&grid, &v)?;
    let report = detect_edges(&interp, &cfg.mesh.edge, args.levels)?;
    let rebuilt = reconstruct(&interp, &report)?;
    write_json(&out.join("edges.json"), &report)?;
    let corrected: Vec<f64> = t.iter().map(|&s| rebuilt.evaluate(s)).collect();
    write_columns(
        &out.join("corrected.csv"),
        &["t", "value", "corrected"],
        &[&t, &v, &corrected],
    )?;
    let pts: Vec<String> = report.ad_points.iter().map(|p| format!("{p:.6}")).collect();
    println!("AD points [{}]", pts.join(", "));
    println!("levels    upper {} lower {}", report.levels.upper, report.levels.lower);
    Ok(())
}

//! `fipsed` command-line driver.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 solver did not
//! converge, 4 structural edge-detection failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{prepare_output, RunConfig, OUTPUT_DIR_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Unconverged(String),
    #[error("{0}")]
    Structural(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Unconverged(_) => 3,
            CliError::Structural(_) => 4,
        }
    }
}

impl From<fipsed::Error> for CliError {
    fn from(e: fipsed::Error) -> Self {
        match e {
            fipsed::Error::InvalidArgument(m) => CliError::Config(m),
            fipsed::Error::Structural(m) => CliError::Structural(m),
            fipsed::Error::Solver(m) => CliError::Unconverged(m),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fipsed",
    version,
    about = "Fourier collocation with bang-bang edge correction"
)]
struct Cli {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: config `output_dir`, else fipsed-out].
    #[arg(long, short, global = true, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Line-delimited JSON solver log on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct EdgeArgs {
    /// Fine-grid size M.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    epsilon_tilde: Option<f64>,
    #[arg(long)]
    r1: Option<usize>,
    #[arg(long)]
    r2: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimum-fuel periodic flight with mesh refinement.
    SolveUav {
        /// UAV parameter file (TOML or JSON).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        n_in: Option<usize>,
        #[arg(long)]
        n_inc: Option<usize>,
        /// Relative change in J that stops refinement.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        max_meshes: Option<usize>,
        #[arg(long)]
        t_f_guess: Option<f64>,
        #[arg(long)]
        t_f_max: Option<f64>,
        #[arg(long)]
        tol_fun: Option<f64>,
        #[arg(long)]
        tol_x: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Perturbed restarts after an unconverged solve.
        #[arg(long)]
        retries: Option<usize>,
        #[command(flatten)]
        edge: EdgeArgs,
    },
    /// Edge detection on the built-in two-level test signals.
    EdgeBench {
        /// Number of samples.
        #[arg(long)]
        n: Option<usize>,
        /// Test function; repeat for several.
        #[arg(long = "function")]
        functions: Vec<String>,
        #[command(flatten)]
        edge: EdgeArgs,
    },
    /// Sensitivity of the smoothed thrust law to the speed costate.
    SensitivityTable {
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        mass: Option<f64>,
        #[arg(long = "tf")]
        t_f: Option<f64>,
        /// Costate and its perturbed value.
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        lambda: Option<Vec<f64>>,
        /// Smoothing factors, comma separated.
        #[arg(long = "sm", value_delimiter = ',')]
        s_m: Vec<f64>,
    },
    /// Convergence-rate studies of interpolation and quadrature.
    FimConvergence {
        #[arg(long)]
        step: Option<usize>,
        #[arg(long)]
        max_n: Option<usize>,
        /// Also write the natural integration matrix of this size.
        #[arg(long)]
        dump_fim: Option<usize>,
    },
    /// Edge detection on sampled data read from a `t,value` CSV.
    DetectEdges {
        input: PathBuf,
        /// Period; inferred from the sample spacing when absent.
        #[arg(long)]
        period: Option<f64>,
        /// Known lower and upper levels.
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        levels: Option<Vec<f64>>,
        #[command(flatten)]
        edge: EdgeArgs,
    },
}

fn apply_edge(edge: &mut fipsed::EdgeConfig, args: &EdgeArgs) {
    if let Some(v) = args.m {
        edge.fine_grid_size = v;
    }
    if let Some(v) = args.epsilon_tilde {
        edge.epsilon_tilde = v;
    }
    if let Some(v) = args.r1 {
        edge.r1 = v;
    }
    if let Some(v) = args.r2 {
        edge.r2 = v;
    }
}

fn pair(v: &[f64]) -> (f64, f64) {
    (v[0], v[1])
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cfg.verbose |= cli.verbose;
    let out = cfg.resolve_output(cli.out);

    match cli.command {
        Command::SolveUav {
            params,
            n_in,
            n_inc,
            epsilon,
            max_meshes,
            t_f_guess,
            t_f_max,
            tol_fun,
            tol_x,
            seed,
            retries,
            edge,
        } => {
            if let Some(p) = params {
                cfg.uav = config::read_file(&p)?;
            }
            let m = &mut cfg.mesh;
            m.n_in = n_in.unwrap_or(m.n_in);
            m.n_inc = n_inc.unwrap_or(m.n_inc);
            m.epsilon = epsilon.unwrap_or(m.epsilon);
            m.max_meshes = max_meshes.unwrap_or(m.max_meshes);
            m.t_f_guess = t_f_guess.unwrap_or(m.t_f_guess);
            m.bounds.t_f_max = t_f_max.unwrap_or(m.bounds.t_f_max);
            apply_edge(&mut m.edge, &edge);
            cfg.solver.tol_fun = tol_fun.unwrap_or(cfg.solver.tol_fun);
            cfg.solver.tol_x = tol_x.unwrap_or(cfg.solver.tol_x);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.retries = retries.unwrap_or(cfg.retries);
            prepare_output(&out)?;
            commands::solve_uav(&cfg, &out)
        }
        Command::EdgeBench { n, functions, edge } => {
            let b = &mut cfg.edge_bench;
            b.n = n.unwrap_or(b.n);
            if !functions.is_empty() {
                b.functions = functions;
            }
            let mut e = fipsed::EdgeConfig {
                fine_grid_size: b.fine_grid_size,
                epsilon_tilde: b.epsilon_tilde,
                r1: b.r1,
                r2: b.r2,
            };
            apply_edge(&mut e, &edge);
            (b.fine_grid_size, b.epsilon_tilde, b.r1, b.r2) = (e.fine_grid_size, e.epsilon_tilde, e.r1, e.r2);
            prepare_output(&out)?;
            commands::edge_bench(&cfg, &out)
        }
        Command::SensitivityTable {
            sigma,
            mass,
            t_f,
            lambda,
            s_m,
        } => {
            let s = &mut cfg.sensitivity;
            s.sigma = sigma.unwrap_or(s.sigma);
            s.mass = mass.unwrap_or(s.mass);
            s.t_f = t_f.unwrap_or(s.t_f);
            if let Some(l) = lambda {
                s.lambda = pair(&l);
            }
            if !s_m.is_empty() {
                s.s_m = s_m;
            }
            prepare_output(&out)?;
            commands::sensitivity(&cfg, &out)
        }
        Command::FimConvergence { step, max_n, dump_fim } => {
            let c = &mut cfg.convergence;
            c.step = step.unwrap_or(c.step);
            c.max_n = max_n.unwrap_or(c.max_n);
            prepare_output(&out)?;
            commands::fim_convergence(&cfg, &out, dump_fim)
        }
        Command::DetectEdges {
            input,
            period,
            levels,
            edge,
        } => {
            apply_edge(&mut cfg.mesh.edge, &edge);
            prepare_output(&out)?;
            let args = commands::DetectArgs {
                input: &input,
                period,
                levels: levels.as_deref().map(pair),
            };
            commands::detect(&cfg, &out, &args)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

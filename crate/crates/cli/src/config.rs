use std::fs;
use std::path::{Path, PathBuf};

use fipsed::nlp::SolverOptions;
use fipsed::transcription::RefineConfig;
use fipsed::uav::{UavParameters, DEFAULT_LAMBDA_PAIR, DEFAULT_SMOOTHING_FACTORS, SENSITIVITY_PERIOD};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "FIPSED_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "fipsed-out";

/// Everything a run reads; file values override the built-in defaults and
/// command-line flags override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    /// Separate parameter file; replaces `uav` when set.
    pub params: Option<PathBuf>,
    pub uav: UavParameters,
    pub mesh: RefineConfig,
    pub solver: SolverConfig,
    /// Seed for the perturbed restarts after an unconverged solve.
    pub seed: u64,
    pub retries: usize,
    pub verbose: bool,
    pub edge_bench: EdgeBenchConfig,
    pub sensitivity: SensitivityConfig,
    pub convergence: ConvergenceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: None,
            params: None,
            uav: UavParameters::default(),
            mesh: RefineConfig::default(),
            solver: SolverConfig::default(),
            seed: 0,
            retries: 0,
            verbose: false,
            edge_bench: EdgeBenchConfig::default(),
            sensitivity: SensitivityConfig::default(),
            convergence: ConvergenceConfig::default(),
        }
    }
}

/// Solver tolerances under MATLAB-style option names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(rename = "TolFun")]
    pub tol_fun: f64,
    #[serde(rename = "TolX")]
    pub tol_x: f64,
    #[serde(rename = "TolCon")]
    pub tol_con: f64,
    #[serde(rename = "MaxIter")]
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            tol_fun: o.stationarity_tol,
            tol_x: o.step_tol,
            tol_con: o.feasibility_tol,
            max_iterations: o.max_iterations,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            stationarity_tol: self.tol_fun,
            step_tol: self.tol_x,
            feasibility_tol: self.tol_con,
            max_iterations: self.max_iterations,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeBenchConfig {
    pub n: usize,
    pub fine_grid_size: usize,
    pub epsilon_tilde: f64,
    pub r1: usize,
    pub r2: usize,
    pub functions: Vec<String>,
}

impl Default for EdgeBenchConfig {
    fn default() -> Self {
        Self {
            n: 100,
            fine_grid_size: 200,
            epsilon_tilde: 0.01,
            r1: 1,
            r2: 2,
            functions: ["f", "g", "h", "w"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub sigma: f64,
    pub mass: f64,
    pub t_f: f64,
    pub lambda: (f64, f64),
    pub s_m: Vec<f64>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        let p = UavParameters::default();
        Self {
            sigma: p.sigma,
            mass: p.mass,
            t_f: SENSITIVITY_PERIOD,
            lambda: DEFAULT_LAMBDA_PAIR,
            s_m: DEFAULT_SMOOTHING_FACTORS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Size increment of the analytic study.
    pub step: usize,
    pub max_n: usize,
    /// The analytic study stops once the error drops below this.
    pub floor: f64,
    pub min_n: usize,
    pub max_algebraic_n: usize,
    pub algebraic_step: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            step: 8,
            max_n: 256,
            floor: 1e-13,
            min_n: 32,
            max_algebraic_n: 512,
            algebraic_step: 16,
        }
    }
}

impl ConvergenceConfig {
    pub fn algebraic_sizes(&self) -> Result<Vec<usize>, CliError> {
        if self.algebraic_step == 0 || self.min_n > self.max_algebraic_n {
            return Err(CliError::Config("empty algebraic size range".into()));
        }
        Ok((self.min_n..=self.max_algebraic_n)
            .step_by(self.algebraic_step)
            .collect())
    }
}

/// Parses TOML or JSON, chosen by extension.
pub fn read_file<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg: RunConfig = match path {
            Some(p) => read_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(params) = &cfg.params {
            let base = path.and_then(Path::parent).unwrap_or(Path::new(""));
            cfg.uav = read_file(&base.join(params))?;
        }
        Ok(cfg)
    }

    /// `flag` already folds in the environment variable.
    pub fn resolve_output(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

pub fn prepare_output(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
    let probe = dir.join(".fipsed-write-test");
    fs::write(&probe, b"")
        .map_err(|e| CliError::Config(format!("output directory {} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

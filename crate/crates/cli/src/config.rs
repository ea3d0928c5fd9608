use std::fs;
use std::path::Path;

use robusteam::instance::{UncertaintySpec, DEFAULT_GAMMA_GLOBAL_PER_JOB, DEFAULT_GAMMA_JOB};
use robusteam::milp::SOLVER_CMD_ENV;
use robusteam::models::Weights;
use serde::Deserialize;

/// Settings shared by all subcommands after merging flags, the config file,
/// the environment and built-in defaults (in that order of precedence).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub weights: Weights,
    /// Per-job budget; `None` keeps the one in the uncertainty file
    /// (single-instance commands) or the built-in default (studies).
    pub gamma_job: Option<usize>,
    /// Absolute global budget; `None` keeps the one in the uncertainty file.
    pub gamma_global: Option<usize>,
    /// Global budget of study solves, as a multiple of `|J|`.
    pub gamma_global_per_job: usize,
    pub time_limit: f64,
    pub seed: u64,
    pub n_scenarios: usize,
    pub solver_cmd: Option<String>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            weights: Weights::default(),
            gamma_job: None,
            gamma_global: None,
            gamma_global_per_job: DEFAULT_GAMMA_GLOBAL_PER_JOB,
            time_limit: 3600.0,
            seed: 42,
            n_scenarios: 1000,
            solver_cmd: None,
            threads: None,
        }
    }
}

/// Contents of a `--config` TOML file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub weights: Option<Weights>,
    pub gamma_job: Option<usize>,
    pub gamma_global: Option<usize>,
    pub gamma_global_per_job: Option<usize>,
    pub time_limit: Option<f64>,
    pub seed: Option<u64>,
    pub n_scenarios: Option<usize>,
    pub solver_cmd: Option<String>,
    pub threads: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}

/// Per-invocation overrides taken from command-line flags.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub gamma_job: Option<usize>,
    pub gamma_global: Option<usize>,
    pub time_limit: Option<f64>,
    pub seed: Option<u64>,
    pub n_scenarios: Option<usize>,
    pub solver_cmd: Option<String>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn resolve(file: Option<FileConfig>, env_solver_cmd: Option<String>, flags: &Overrides) -> Self {
        let mut cfg = RunConfig::default();
        if let Some(cmd) = env_solver_cmd.filter(|c| !c.trim().is_empty()) {
            cfg.solver_cmd = Some(cmd);
        }
        if let Some(f) = file {
            if let Some(w) = f.weights {
                cfg.weights = w;
            }
            cfg.gamma_job = f.gamma_job.or(cfg.gamma_job);
            cfg.gamma_global = f.gamma_global.or(cfg.gamma_global);
            cfg.gamma_global_per_job = f.gamma_global_per_job.unwrap_or(cfg.gamma_global_per_job);
            cfg.time_limit = f.time_limit.unwrap_or(cfg.time_limit);
            cfg.seed = f.seed.unwrap_or(cfg.seed);
            cfg.n_scenarios = f.n_scenarios.unwrap_or(cfg.n_scenarios);
            cfg.solver_cmd = f.solver_cmd.or(cfg.solver_cmd);
            cfg.threads = f.threads.or(cfg.threads);
        }
        let w = &mut cfg.weights;
        w.alpha = flags.alpha.unwrap_or(w.alpha);
        w.beta = flags.beta.unwrap_or(w.beta);
        w.mu = flags.mu.unwrap_or(w.mu);
        w.nu = flags.nu.unwrap_or(w.nu);
        cfg.gamma_job = flags.gamma_job.or(cfg.gamma_job);
        cfg.gamma_global = flags.gamma_global.or(cfg.gamma_global);
        cfg.time_limit = flags.time_limit.unwrap_or(cfg.time_limit);
        cfg.seed = flags.seed.unwrap_or(cfg.seed);
        cfg.n_scenarios = flags.n_scenarios.unwrap_or(cfg.n_scenarios);
        cfg.solver_cmd = flags.solver_cmd.clone().or(cfg.solver_cmd);
        cfg.threads = flags.threads.or(cfg.threads);
        cfg
    }

    pub fn from_sources(config_path: Option<&Path>, flags: &Overrides) -> Result<Self, String> {
        let file = config_path.map(FileConfig::load).transpose()?;
        Ok(Self::resolve(file, std::env::var(SOLVER_CMD_ENV).ok(), flags))
    }

    /// Applies any budget overrides to an uncertainty specification.
    pub fn apply_budgets(&self, unc: &UncertaintySpec) -> UncertaintySpec {
        unc.with_budgets(
            self.gamma_job.unwrap_or(unc.gamma_job),
            self.gamma_global.unwrap_or(unc.gamma_global),
        )
    }

    pub fn study_gamma_job(&self) -> usize {
        self.gamma_job.unwrap_or(DEFAULT_GAMMA_JOB)
    }
}

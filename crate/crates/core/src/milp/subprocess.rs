//! External solvers driven through LP files.
//!
//! The configured command is run as `<cmd...> <model.lp> <solution.txt>
//! <time-limit-seconds>`. It must exit with status 0 and leave a solution
//! file of the form
//!
//! ```text
//! status optimal|feasible|infeasible|timeout
//! objective <number>
//! bound <number>
//! runtime <seconds>
//! values
//! <variable-name> <value>
//! ...
//! ```
//!
//! Header lines other than `status` are optional; variables missing from the
//! `values` block are read as 0.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use super::lp::emit_lp_file;
use super::{MilpModel, RawSolution, SolveStatus, SolverBackend};
use crate::error::{Error, Result};

pub const SOLVER_CMD_ENV: &str = "ROBUSTEAM_SOLVER_CMD";

static COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct SubprocessBackend {
    program: String,
    args: Vec<String>,
    workdir: PathBuf,
}

impl SubprocessBackend {
    /// `command` is split on whitespace; the first word is the program.
    pub fn new(command: &str) -> Result<Self> {
        let mut words = command.split_whitespace().map(str::to_owned);
        let program = words
            .next()
            .ok_or_else(|| Error::BackendMissing("empty solver command".into()))?;
        Ok(Self {
            program,
            args: words.collect(),
            workdir: std::env::temp_dir(),
        })
    }

    pub fn with_workdir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.workdir = dir.into();
        self
    }

    fn scratch_paths(&self) -> (PathBuf, PathBuf) {
        let id = COUNTER.fetch_add(1, Ordering::Relaxed);
        let stem = format!("robusteam-{}-{id}", std::process::id());
        (
            self.workdir.join(format!("{stem}.lp")),
            self.workdir.join(format!("{stem}.sol")),
        )
    }
}

impl SolverBackend for SubprocessBackend {
    fn name(&self) -> &str {
        &self.program
    }

    fn solve_raw(&self, model: &MilpModel, time_limit_seconds: f64) -> Result<RawSolution> {
        let (lp_path, sol_path) = self.scratch_paths();
        emit_lp_file(model, &lp_path)?;
        let started = Instant::now();
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(&lp_path)
            .arg(&sol_path)
            .arg(format!("{time_limit_seconds}"))
            .output();
        let elapsed = started.elapsed().as_secs_f64();
        let _ = fs::remove_file(&lp_path);
        let output = match output {
            Ok(o) => o,
            Err(e) if e.kind() == ErrorKind::NotFound => {
                return Err(Error::BackendMissing(format!("`{}` not found", self.program)))
            }
            Err(e) => return Err(Error::BackendCrash(format!("cannot run `{}`: {e}", self.program))),
        };
        if !output.status.success() {
            let _ = fs::remove_file(&sol_path);
            return Err(Error::BackendCrash(format!(
                "`{}` exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let parsed = read_solution_file(&sol_path);
        let _ = fs::remove_file(&sol_path);
        let parsed = parsed.map_err(|e| Error::BackendCrash(format!("unreadable solution file: {e}")))?;
        let values = parsed.status.has_solution().then(|| {
            model
                .variables()
                .iter()
                .map(|v| parsed.values.get(&v.name).copied().unwrap_or(0.0))
                .collect()
        });
        Ok(RawSolution {
            status: parsed.status,
            objective: parsed.objective,
            bound: parsed.bound,
            values,
            runtime_seconds: parsed.runtime.unwrap_or(elapsed),
        })
    }
}

/// Contents of a solution file exchanged with an external solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub runtime: Option<f64>,
    pub values: HashMap<String, f64>,
}

fn parse_status(s: &str) -> Result<SolveStatus> {
    match s {
        "optimal" => Ok(SolveStatus::Optimal),
        "feasible" | "feasible-with-gap" => Ok(SolveStatus::FeasibleWithGap),
        "infeasible" => Ok(SolveStatus::Infeasible),
        "timeout" => Ok(SolveStatus::Timeout),
        other => Err(Error::Parse(format!("unknown status `{other}`"))),
    }
}

pub fn read_solution_file(path: impl AsRef<Path>) -> Result<SolutionFile> {
    let text = fs::read_to_string(path)?;
    let mut status = None;
    let mut objective = None;
    let mut bound = None;
    let mut runtime = None;
    let mut values = HashMap::new();
    let mut in_values = false;
    let number = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad number `{s}`")))
    };
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let val = parts.next();
        if in_values {
            let v = val.ok_or_else(|| Error::Parse(format!("missing value for `{key}`")))?;
            values.insert(key.to_string(), number(v)?);
            continue;
        }
        match (key, val) {
            ("values", None) => in_values = true,
            ("status", Some(s)) => status = Some(parse_status(s)?),
            ("objective", Some(v)) => objective = Some(number(v)?),
            ("bound", Some(v)) => bound = Some(number(v)?),
            ("runtime", Some(v)) => runtime = Some(number(v)?),
            _ => return Err(Error::Parse(format!("unexpected line `{line}`"))),
        }
    }
    Ok(SolutionFile {
        status: status.ok_or_else(|| Error::Parse("missing status line".into()))?,
        objective,
        bound,
        runtime,
        values,
    })
}

/// Writes a solution file for `model` from a backend result.
pub fn write_solution_file(path: impl AsRef<Path>, model: &MilpModel, raw: &RawSolution) -> Result<()> {
    let mut out = String::new();
    let status = match raw.status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::FeasibleWithGap => "feasible",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Timeout => "timeout",
    };
    let _ = writeln!(out, "status {status}");
    if let Some(o) = raw.objective {
        let _ = writeln!(out, "objective {o}");
    }
    if let Some(b) = raw.bound {
        let _ = writeln!(out, "bound {b}");
    }
    let _ = writeln!(out, "runtime {}", raw.runtime_seconds);
    if let Some(values) = &raw.values {
        out.push_str("values\n");
        for (v, x) in model.variables().iter().zip(values) {
            let _ = writeln!(out, "{} {x}", v.name);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reference external solver: reads an LP file, solves it with the linked
/// HiGHS and writes a solution file in the format above.
pub fn solve_lp_file(lp_path: impl AsRef<Path>, sol_path: impl AsRef<Path>, time_limit_seconds: f64) -> Result<SolveStatus> {
    let model = super::lp::read_lp_file(lp_path)?;
    let raw = super::HighsBackend::default().solve_raw(&model, time_limit_seconds)?;
    write_solution_file(sol_path, &model, &raw)?;
    Ok(raw.status)
}

//! Solver-agnostic MILP representation and the solve adapter contract.
//!
//! Model builders only produce a [`MilpModel`]; a [`SolverBackend`] turns it
//! into a [`RawSolution`], and [`solve`] re-checks every returned assignment
//! against the model before handing it out.

mod highs_backend;
pub mod lp;
mod subprocess;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use highs_backend::HighsBackend;
pub use subprocess::{read_solution_file, solve_lp_file, write_solution_file, SolutionFile, SubprocessBackend, SOLVER_CMD_ENV};

/// Absolute tolerance for constraint and bound checks on returned assignments.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Maximal distance of a binary value from 0 or 1.
pub const INTEGRALITY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violate the constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.cmp {
            Cmp::Le => (lhs - self.rhs).max(0.0),
            Cmp::Ge => (self.rhs - lhs).max(0.0),
            Cmp::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjSense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: ObjSense,
    pub terms: Vec<(VarId, f64)>,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    name: String,
    vars: Vec<Variable>,
    index: HashMap<String, VarId>,
    constraints: Vec<Constraint>,
    constraint_names: HashMap<String, usize>,
    objective: Objective,
}

impl MilpModel {
    pub fn new(name: impl Into<String>, sense: ObjSense) -> Self {
        Self {
            name: name.into(),
            vars: Vec::new(),
            index: HashMap::new(),
            constraints: Vec::new(),
            constraint_names: HashMap::new(),
            objective: Objective {
                sense,
                terms: Vec::new(),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> Result<VarId> {
        let name = name.into();
        if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == ':') {
            return Err(Error::Model(format!("illegal variable name {name:?}")));
        }
        if self.index.contains_key(&name) {
            return Err(Error::Model(format!("duplicate variable `{name}`")));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (0.0, 1.0),
            VarKind::Continuous => (lower, upper),
        };
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::Model(format!(
                "variable `{name}` has empty domain [{lower}, {upper}]"
            )));
        }
        let id = VarId(self.vars.len());
        self.index.insert(name.clone(), id);
        self.vars.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        Ok(id)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId> {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    /// Adds a linear constraint. Repeated variables are merged and zero
    /// coefficients dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        cmp: Cmp,
        rhs: f64,
    ) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == ':') {
            return Err(Error::Model(format!("illegal constraint name {name:?}")));
        }
        if self.constraint_names.contains_key(&name) {
            return Err(Error::Model(format!("duplicate constraint `{name}`")));
        }
        if !rhs.is_finite() {
            return Err(Error::Model(format!("constraint `{name}` has rhs {rhs}")));
        }
        let terms = self.normalize(&name, terms)?;
        self.constraint_names.insert(name.clone(), self.constraints.len());
        self.constraints.push(Constraint {
            name,
            terms,
            cmp,
            rhs,
        });
        Ok(())
    }

    pub fn set_objective(&mut self, sense: ObjSense, terms: impl IntoIterator<Item = (VarId, f64)>) -> Result<()> {
        let terms = self.normalize("objective", terms)?;
        self.objective = Objective { sense, terms };
        Ok(())
    }

    fn normalize(
        &self,
        owner: &str,
        terms: impl IntoIterator<Item = (VarId, f64)>,
    ) -> Result<Vec<(VarId, f64)>> {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        let mut position: HashMap<VarId, usize> = HashMap::new();
        for (v, a) in terms {
            if v.0 >= self.vars.len() {
                return Err(Error::Model(format!("`{owner}` references undeclared variable #{}", v.0)));
            }
            if !a.is_finite() {
                return Err(Error::Model(format!("`{owner}` has coefficient {a}")));
            }
            match position.get(&v) {
                Some(&p) => merged[p].1 += a,
                None => {
                    position.insert(v, merged.len());
                    merged.push((v, a));
                }
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        Ok(merged)
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraint_names.get(name).map(|&i| &self.constraints[i])
    }

    /// Number of constraints whose name starts with `prefix`.
    pub fn count_constraints(&self, prefix: &str) -> usize {
        self.constraints.iter().filter(|c| c.name.starts_with(prefix)).count()
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// First bound, integrality or constraint violation of `values`, if any.
    pub fn check_assignment(&self, values: &[f64], tol: f64) -> Option<(String, f64)> {
        if values.len() != self.vars.len() {
            return Some(("<dimension>".into(), f64::INFINITY));
        }
        for (v, &x) in self.vars.iter().zip(values) {
            if !x.is_finite() {
                return Some((format!("value of {}", v.name), f64::INFINITY));
            }
            let out = (v.lower - x).max(x - v.upper).max(0.0);
            if out > tol {
                return Some((format!("bounds of {}", v.name), out));
            }
            if v.kind == VarKind::Binary {
                let frac = (x - x.round()).abs();
                if frac > INTEGRALITY_TOL {
                    return Some((format!("integrality of {}", v.name), frac));
                }
            }
        }
        self.constraints
            .iter()
            .map(|c| (c, c.violation(values)))
            .find(|&(_, viol)| viol > tol)
            .map(|(c, viol)| (c.name.clone(), viol))
    }

    /// Copy of the model with every binary fixed to its (rounded) value in `values`.
    pub fn with_fixed_binaries(&self, values: &[f64]) -> MilpModel {
        let mut fixed = self.clone();
        for (v, &x) in fixed.vars.iter_mut().zip(values) {
            if v.kind == VarKind::Binary {
                let r = x.round().clamp(0.0, 1.0);
                v.kind = VarKind::Continuous;
                v.lower = r;
                v.upper = r;
            }
        }
        fixed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleWithGap,
    Infeasible,
    Timeout,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleWithGap)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleWithGap => "feasible-with-gap",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Timeout => "timeout",
        })
    }
}

/// What a backend reports before any checking. `values` is aligned with
/// [`MilpModel::variables`].
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub runtime_seconds: f64,
}

pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &str;

    fn solve_raw(&self, model: &MilpModel, time_limit_seconds: f64) -> Result<RawSolution>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective_value: Option<f64>,
    /// Best proven bound on the objective.
    pub bound: Option<f64>,
    /// `(bound - incumbent) / |incumbent|` for maximization (mirrored for
    /// minimization); 0 when proven optimal.
    pub gap: Option<f64>,
    pub runtime_seconds: f64,
    pub values: BTreeMap<String, f64>,
}

impl SolveResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    /// Value of a variable that must be present.
    pub fn get(&self, name: &str) -> f64 {
        self.values.get(name).copied().unwrap_or(0.0)
    }
}

fn relative_gap(sense: ObjSense, objective: f64, bound: f64) -> f64 {
    let diff = match sense {
        ObjSense::Maximize => bound - objective,
        ObjSense::Minimize => objective - bound,
    };
    (diff / objective.abs().max(1e-10)).max(0.0)
}

/// Solves `model` with `backend` and re-verifies the returned assignment.
///
/// Binary values are snapped to 0/1 before the check. If the snapped
/// assignment leaves a residual violation (a big-M row fed by a binary at
/// `1 - 1e-9`, say), the continuous part is re-solved once with all binaries
/// fixed. A remaining violation is a hard error.
pub fn solve(model: &MilpModel, backend: &dyn SolverBackend, time_limit_seconds: f64) -> Result<SolveResult> {
    let raw = backend.solve_raw(model, time_limit_seconds)?;
    let mut runtime = raw.runtime_seconds;
    let Some(mut values) = raw.values.filter(|_| raw.status.has_solution()) else {
        return Ok(SolveResult {
            status: raw.status,
            objective_value: None,
            bound: raw.bound,
            gap: None,
            runtime_seconds: runtime,
            values: BTreeMap::new(),
        });
    };
    if values.len() != model.num_vars() {
        return Err(Error::BackendCrash(format!(
            "{} returned {} values for {} variables",
            backend.name(),
            values.len(),
            model.num_vars()
        )));
    }
    for (v, x) in model.variables().iter().zip(values.iter_mut()) {
        if v.kind == VarKind::Binary && (*x - x.round()).abs() <= INTEGRALITY_TOL {
            *x = x.round();
        }
    }
    if model.check_assignment(&values, FEASIBILITY_TOL).is_some() {
        let polished = backend.solve_raw(&model.with_fixed_binaries(&values), time_limit_seconds)?;
        runtime += polished.runtime_seconds;
        if let (SolveStatus::Optimal, Some(mut p)) = (polished.status, polished.values) {
            for (v, x) in model.variables().iter().zip(p.iter_mut()) {
                if v.kind == VarKind::Binary {
                    *x = x.round();
                }
            }
            if model.check_assignment(&p, FEASIBILITY_TOL).is_none() {
                log::debug!("{}: assignment repaired by fixed-binary polish", model.name());
                values = p;
            }
        }
    }
    if let Some((constraint, violation)) = model.check_assignment(&values, FEASIBILITY_TOL) {
        return Err(Error::SolutionCheck {
            constraint,
            violation,
        });
    }
    let objective = model.objective_value(&values);
    let sense = model.objective().sense;
    let (bound, gap) = match (raw.status, raw.bound) {
        (SolveStatus::Optimal, _) => (Some(raw.bound.unwrap_or(objective)), Some(0.0)),
        (_, Some(b)) => (Some(b), Some(relative_gap(sense, objective, b))),
        (_, None) => (None, None),
    };
    let values = model
        .variables()
        .iter()
        .zip(values)
        .map(|(v, x)| (v.name.clone(), x))
        .collect();
    Ok(SolveResult {
        status: raw.status,
        objective_value: Some(objective),
        bound,
        gap,
        runtime_seconds: runtime,
        values,
    })
}

/// The default backend: an explicit command wins, then the
/// `ROBUSTEAM_SOLVER_CMD` environment variable, then the linked HiGHS.
pub fn default_backend(solver_cmd: Option<&str>) -> Result<Box<dyn SolverBackend>> {
    let from_env = std::env::var(SOLVER_CMD_ENV).ok().filter(|s| !s.trim().is_empty());
    match solver_cmd.map(str::to_owned).or(from_env) {
        Some(cmd) => Ok(Box::new(SubprocessBackend::new(&cmd)?)),
        None => Ok(Box::new(HighsBackend::default())),
    }
}

use std::time::Instant;

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense};

use super::{MilpModel, ObjSense, RawSolution, SolveStatus, SolverBackend, VarKind};
use crate::error::{Error, Result};

/// In-process HiGHS. Optimality is proven to an absolute gap of 1e-9, not
/// the HiGHS default relative gap, so objective values can be compared
/// against exact enumeration.
#[derive(Debug, Clone)]
pub struct HighsBackend {
    pub threads: Option<u32>,
    pub verbose: bool,
}

impl Default for HighsBackend {
    fn default() -> Self {
        Self {
            threads: Some(1),
            verbose: false,
        }
    }
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve_raw(&self, model: &MilpModel, time_limit_seconds: f64) -> Result<RawSolution> {
        let started = Instant::now();
        if model.num_vars() == 0 {
            return Ok(RawSolution {
                status: SolveStatus::Optimal,
                objective: Some(0.0),
                bound: Some(0.0),
                values: Some(Vec::new()),
                runtime_seconds: 0.0,
            });
        }
        let mut costs = vec![0.0; model.num_vars()];
        for &(v, a) in &model.objective().terms {
            costs[v.index()] += a;
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .variables()
            .iter()
            .zip(&costs)
            .map(|(v, &c)| match v.kind {
                VarKind::Binary => pb.add_integer_column(c, 0.0..=1.0),
                VarKind::Continuous => pb.add_column(c, v.lower..=v.upper),
            })
            .collect();
        for con in model.constraints() {
            let row: Vec<_> = con.terms.iter().map(|&(v, a)| (cols[v.index()], a)).collect();
            match con.cmp {
                super::Cmp::Le => pb.add_row(..=con.rhs, row),
                super::Cmp::Ge => pb.add_row(con.rhs.., row),
                super::Cmp::Eq => pb.add_row(con.rhs..=con.rhs, row),
            }
        }
        let sense = match model.objective().sense {
            ObjSense::Maximize => Sense::Maximise,
            ObjSense::Minimize => Sense::Minimise,
        };
        let mut highs = pb
            .try_optimise(sense)
            .map_err(|s| Error::BackendCrash(format!("HiGHS rejected the model: {s:?}")))?;
        if self.verbose {
            let _ = highs.try_set_option("output_flag", true);
            let _ = highs.try_set_option("log_to_console", true);
        } else {
            highs.make_quiet();
        }
        let options: [(&str, f64); 5] = [
            ("time_limit", time_limit_seconds.max(0.0)),
            ("mip_rel_gap", 0.0),
            ("mip_abs_gap", 1e-9),
            ("mip_feasibility_tolerance", 1e-8),
            ("primal_feasibility_tolerance", 1e-9),
        ];
        for (key, value) in options {
            highs
                .try_set_option(key, value)
                .map_err(|_| Error::BackendCrash(format!("HiGHS refused option {key}")))?;
        }
        if let Some(t) = self.threads {
            highs
                .try_set_option("threads", t as i32)
                .map_err(|_| Error::BackendCrash("HiGHS refused option threads".into()))?;
        }
        let solved = highs
            .try_solve()
            .map_err(|s| Error::BackendCrash(format!("HiGHS run failed: {s:?}")))?;
        let runtime_seconds = started.elapsed().as_secs_f64();
        let has_primal = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit
            | HighsModelStatus::Unknown
                if has_primal =>
            {
                SolveStatus::FeasibleWithGap
            }
            HighsModelStatus::ReachedTimeLimit | HighsModelStatus::ReachedIterationLimit => {
                SolveStatus::Timeout
            }
            other => {
                return Err(Error::BackendCrash(format!(
                    "HiGHS finished with status {other:?}"
                )))
            }
        };
        let values = status
            .has_solution()
            .then(|| solved.get_solution().columns().to_vec());
        let objective = values.as_ref().map(|_| solved.objective_value());
        let bound = if model.num_binaries() > 0 {
            solved
                .double_info_value(c"mip_dual_bound")
                .ok()
                .filter(|b| b.is_finite())
        } else {
            objective
        };
        Ok(RawSolution {
            status,
            objective,
            bound,
            values,
            runtime_seconds,
        })
    }
}

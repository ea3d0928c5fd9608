//! Exact adversary against a fixed plan: which performed jobs can be made
//! infeasible by raising requirements within a global cost budget.
//!
//! Four independent evaluations are provided: the dynamic program, subset
//! enumeration, the adversarial integer program and a longest path over
//! (job, budget) nodes. They must always agree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, UncertaintySpec};
use crate::milp::{self, Cmp, MilpModel, ObjSense, SolverBackend};
use crate::models::Solution;

/// Largest number of performed jobs accepted by [`bruteforce_from_costs`].
pub const BRUTEFORCE_LIMIT: usize = 20;

/// Buffers and disruption costs of the performed jobs of a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferTable {
    pub n_jobs: usize,
    /// `b[k][l]` per performed job.
    pub buffers: BTreeMap<usize, Vec<Vec<i64>>>,
    /// Cheapest disruption per performed job, clamped at 0.
    pub disruption_cost: BTreeMap<usize, u64>,
    /// Unit costs `c[k][l]` per performed job, kept for the IP and path views.
    pub unit_costs: BTreeMap<usize, Vec<Vec<u32>>>,
}

/// `min_{k,l} (b + 1) c`, clamped at 0: an already unmet cell is free to break.
pub fn disruption_cost(buffers: &[Vec<i64>], costs: &[Vec<u32>]) -> u64 {
    buffers
        .iter()
        .flatten()
        .zip(costs.iter().flatten())
        .map(|(&b, &c)| (b + 1) * i64::from(c))
        .min()
        .unwrap_or(0)
        .max(0) as u64
}

impl BufferTable {
    /// Builds the table without checking the plan.
    pub fn from_parts(n_jobs: usize, buffers: BTreeMap<usize, Vec<Vec<i64>>>, unit_costs: BTreeMap<usize, Vec<Vec<u32>>>) -> Self {
        let disruption_cost = buffers
            .iter()
            .map(|(&j, b)| (j, disruption_cost(b, &unit_costs[&j])))
            .collect();
        Self {
            n_jobs,
            buffers,
            disruption_cost,
            unit_costs,
        }
    }

    pub fn from_solution(sol: &Solution, inst: &Instance, unc: &UncertaintySpec) -> Self {
        let mut buffers = BTreeMap::new();
        let mut unit_costs = BTreeMap::new();
        for &j in sol.performed.keys() {
            let profile = sol.profile_of_job(inst, j).expect("performed job has a team");
            let b = (0..inst.n_skills())
                .map(|k| {
                    (0..inst.n_levels())
                        .map(|l| i64::from(profile[k][l]) - i64::from(inst.requirement(j, k, l)))
                        .collect()
                })
                .collect();
            buffers.insert(j, b);
            unit_costs.insert(j, unc.costs[j - 1].clone());
        }
        Self::from_parts(inst.n_jobs(), buffers, unit_costs)
    }

    /// Disruption cost by job index `1..=n_jobs`; `None` for jobs not performed.
    pub fn cost_vector(&self) -> Vec<Option<u64>> {
        (1..=self.n_jobs).map(|j| self.disruption_cost.get(&j).copied()).collect()
    }
}

fn checked_table(sol: &Solution, inst: &Instance, unc: &UncertaintySpec) -> Result<BufferTable> {
    unc.validate(inst)?;
    let mut copy = sol.clone();
    copy.verify(inst)?;
    Ok(BufferTable::from_solution(&copy, inst, unc))
}

/// `F[j][g]` for `j` in `0..=n`, `g` in `0..=gamma`.
pub fn dp_from_costs(costs: &[Option<u64>], gamma: usize) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; gamma + 1]];
    for cost in costs {
        let prev = table.last().expect("row 0 exists");
        let row = (0..=gamma)
            .map(|g| match cost {
                Some(c) if *c as usize <= g => prev[g].max(1 + prev[g - *c as usize]),
                _ => prev[g],
            })
            .collect();
        table.push(row);
    }
    table
}

/// Largest subset of performed jobs whose costs fit in `gamma`, by enumeration.
pub fn bruteforce_from_costs(costs: &[Option<u64>], gamma: usize) -> Result<usize> {
    let performed: Vec<u64> = costs.iter().flatten().copied().collect();
    if performed.len() > BRUTEFORCE_LIMIT {
        return Err(Error::SizeGuard {
            what: "performed jobs",
            limit: BRUTEFORCE_LIMIT,
            actual: performed.len(),
        });
    }
    let mut best = 0;
    for mask in 0u32..(1 << performed.len()) {
        let spent: u64 = (0..performed.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| performed[i])
            .sum();
        if spent <= gamma as u64 {
            best = best.max(mask.count_ones() as usize);
        }
    }
    Ok(best)
}

/// Longest path from `(0, 0)` to `(n, gamma)` where the arc
/// `(j, g) -> (j', g')`, `j' > j`, `g' >= g`, earns 1 if job `j'` is performed
/// and some cell has `(b + 1) c <= g' - g`.
pub fn longest_path_from_table(table: &BufferTable, gamma: usize) -> usize {
    let n = table.n_jobs;
    let reward = |jp: usize, delta: usize| -> usize {
        let Some(b) = table.buffers.get(&jp) else { return 0 };
        let c = &table.unit_costs[&jp];
        let hit = b
            .iter()
            .flatten()
            .zip(c.iter().flatten())
            .any(|(&b, &c)| (b + 1) * i64::from(c) <= delta as i64);
        usize::from(hit)
    };
    // Nodes in topological order: job index first, then budget.
    let mut best: Vec<Vec<Option<usize>>> = vec![vec![None; gamma + 1]; n + 1];
    best[0][0] = Some(0);
    for j in 0..n {
        for g in 0..=gamma {
            let Some(here) = best[j][g] else { continue };
            for jp in j + 1..=n {
                for gp in g..=gamma {
                    let cand = here + reward(jp, gp - g);
                    let slot = &mut best[jp][gp];
                    if slot.is_none_or(|v| cand > v) {
                        *slot = Some(cand);
                    }
                }
            }
        }
    }
    best[n][gamma].unwrap_or(0)
}

/// The adversarial integer program: binaries `zeta_{j}` and
/// `zeta_{j}_{k}_{l}` over performed jobs, linking rows and one budget row.
pub fn adversary_model(table: &BufferTable, gamma: usize) -> Result<MilpModel> {
    let mut m = MilpModel::new("adversary", ObjSense::Maximize);
    let mut budget = Vec::new();
    let mut objective = Vec::new();
    for (&j, b) in &table.buffers {
        let zj = m.add_binary(format!("zeta_{j}"))?;
        objective.push((zj, 1.0));
        let mut link = vec![(zj, 1.0)];
        let c = &table.unit_costs[&j];
        for (k, row) in b.iter().enumerate() {
            for (l, &bkl) in row.iter().enumerate() {
                let z = m.add_binary(format!("zeta_{j}_{k}_{l}"))?;
                link.push((z, -1.0));
                let cost = ((bkl + 1) * i64::from(c[k][l])).max(0);
                budget.push((z, cost as f64));
            }
        }
        m.add_constraint(format!("link_{j}"), link, Cmp::Le, 0.0)?;
    }
    m.add_constraint("budget", budget, Cmp::Le, gamma as f64)?;
    m.set_objective(ObjSense::Maximize, objective)?;
    Ok(m)
}

pub fn milp_from_table(table: &BufferTable, gamma: usize, backend: &dyn SolverBackend) -> Result<usize> {
    let model = adversary_model(table, gamma)?;
    let result = milp::solve(&model, backend, 600.0)?;
    if result.status != milp::SolveStatus::Optimal {
        return Err(Error::NoSolution(format!("adversary model ended {}", result.status)));
    }
    Ok(result.objective_value.unwrap_or(0.0).round() as usize)
}

/// Adversary value `F(|J|, Γ)` and the full table, for a verified plan.
pub fn adversary_dp(sol: &Solution, inst: &Instance, unc: &UncertaintySpec) -> Result<(usize, Vec<Vec<usize>>)> {
    let table = checked_table(sol, inst, unc)?;
    let f = dp_from_costs(&table.cost_vector(), unc.gamma_global);
    Ok((f[inst.n_jobs()][unc.gamma_global], f))
}

pub fn adversary_bruteforce(sol: &Solution, inst: &Instance, unc: &UncertaintySpec) -> Result<usize> {
    let table = checked_table(sol, inst, unc)?;
    bruteforce_from_costs(&table.cost_vector(), unc.gamma_global)
}

pub fn adversary_milp(sol: &Solution, inst: &Instance, unc: &UncertaintySpec, backend: &dyn SolverBackend) -> Result<usize> {
    let table = checked_table(sol, inst, unc)?;
    milp_from_table(&table, unc.gamma_global, backend)
}

pub fn longest_path_value(sol: &Solution, inst: &Instance, unc: &UncertaintySpec) -> Result<usize> {
    let table = checked_table(sol, inst, unc)?;
    Ok(longest_path_from_table(&table, unc.gamma_global))
}

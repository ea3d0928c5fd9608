//! Exhaustive solver for tiny instances, independent of any MILP backend.
//!
//! Teams are enumerated as canonical partitions of a subset of employees
//! (team labels are interchangeable), jobs are assigned to teams in every
//! possible way, and each team's job set is sequenced by the cheapest
//! permutation under earliest-start scheduling.

use rayon::prelude::*;

use crate::adversary::dp_from_costs;
use crate::error::{Error, Result};
use crate::instance::{Instance, UncertaintySpec};
use crate::models::{compute_rbar_block, BigM, ModelKind, Solution, Weights};

pub const MAX_JOBS: usize = 5;
pub const MAX_EMPLOYEES: usize = 5;

/// Best order of every job subset: `(sum of finish times, route)`, `None`
/// if no order meets the horizon.
fn best_routes(inst: &Instance) -> Vec<Option<(f64, Vec<usize>)>> {
    let n = inst.n_jobs();
    (0u32..1 << n)
        .map(|mask| {
            let jobs: Vec<usize> = (1..=n).filter(|j| mask & (1 << (j - 1)) != 0).collect();
            let mut best: Option<(f64, Vec<usize>)> = None;
            permutations(&jobs, &mut |route| {
                let mut prev = 0;
                let mut clock = 0.0;
                let mut total = 0.0;
                for &j in route {
                    clock += inst.travel(prev, j) + inst.processing(j);
                    if clock > inst.e_max() {
                        return;
                    }
                    total += clock;
                    prev = j;
                }
                if best.as_ref().is_none_or(|(b, _)| total < *b) {
                    best = Some((total, route.to_vec()));
                }
            });
            best
        })
        .collect()
}

fn permutations(items: &[usize], visit: &mut dyn FnMut(&[usize])) {
    fn rec(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            rec(items, k + 1, visit);
            items.swap(k, i);
        }
    }
    rec(&mut items.to_vec(), 0, visit);
}

/// Canonical partitions of a subset of `0..n_employees` into at most
/// `max_teams` labelled blocks; `None` leaves an employee out.
fn team_partitions(n_employees: usize, max_teams: usize) -> Vec<Vec<Option<usize>>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n_employees);
    fn rec(n: usize, max_teams: usize, blocks: usize, current: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        current.push(None);
        rec(n, max_teams, blocks, current, out);
        current.pop();
        for b in 0..blocks {
            current.push(Some(b));
            rec(n, max_teams, blocks, current, out);
            current.pop();
        }
        if blocks < max_teams {
            current.push(Some(blocks));
            rec(n, max_teams, blocks + 1, current, out);
            current.pop();
        }
    }
    rec(n_employees, max_teams, 0, &mut current, &mut out);
    out
}

struct Context<'a> {
    inst: &'a Instance,
    unc: Option<&'a UncertaintySpec>,
    kind: ModelKind,
    weights: Weights,
    routes: Vec<Option<(f64, Vec<usize>)>>,
    rbar: Vec<u64>,
    rho_cap_rm1: f64,
    rho_cap_rm2: f64,
}

#[derive(Clone)]
struct Candidate {
    objective: f64,
    teams: Vec<Vec<usize>>,
    job_team: Vec<Option<usize>>,
}

impl Context<'_> {
    fn best_for_partition(&self, partition: &[Option<usize>]) -> Option<Candidate> {
        let inst = self.inst;
        let n_teams = inst.team_bound();
        let n = inst.n_jobs();
        let mut teams = vec![Vec::new(); n_teams];
        for (m, b) in partition.iter().enumerate() {
            if let Some(b) = b {
                teams[*b].push(m);
            }
        }
        let profiles: Vec<Vec<Vec<u32>>> = teams.iter().map(|t| inst.team_profile(t)).collect();
        let quals: Vec<u32> = teams
            .iter()
            .map(|t| t.iter().map(|&m| inst.qualification_count(m)).sum())
            .collect();

        // Per (job, team): can serve? slack gained and disruption cost if so.
        let mut options: Vec<Vec<(usize, f64, u64)>> = vec![Vec::new(); n + 1];
        for j in inst.jobs() {
            for t in 0..n_teams {
                if !inst.profile_covers(&profiles[t], j) {
                    continue;
                }
                let (slack, cost) = match self.kind {
                    ModelKind::Dm => (0.0, 0),
                    ModelKind::Rm1 => {
                        let surplus = f64::from(quals[t]) - self.rbar[j - 1] as f64;
                        if surplus < 0.0 {
                            continue;
                        }
                        (surplus.min(self.rho_cap_rm1), 0)
                    }
                    ModelKind::Rm2 => {
                        let unc = self.unc.expect("checked by caller");
                        let mut slack = 0.0;
                        let mut cost = u64::MAX;
                        for k in 0..inst.n_skills() {
                            for l in 0..inst.n_levels() {
                                let b = profiles[t][k][l] - inst.requirement(j, k, l);
                                slack += f64::from(b).min(self.rho_cap_rm2);
                                cost = cost.min(u64::from(b + 1) * u64::from(unc.cost(j, k, l)));
                            }
                        }
                        (slack, cost)
                    }
                };
                options[j].push((t, slack, cost));
            }
        }

        let mut best: Option<Candidate> = None;
        let mut choice = vec![None; n + 1];
        let mut costs = vec![None; n];
        let mut assign = |choice: &[Option<(usize, f64, u64)>]| {
            let mut masks = vec![0u32; n_teams];
            let mut served = 0usize;
            let mut slack = 0.0;
            for j in 1..=n {
                costs[j - 1] = None;
                if let Some((t, s, c)) = choice[j] {
                    masks[t] |= 1 << (j - 1);
                    served += 1;
                    slack += s;
                    costs[j - 1] = Some(c);
                }
            }
            let mut finish = 0.0;
            for &mask in &masks {
                match &self.routes[mask as usize] {
                    Some((f, _)) => finish += f,
                    None => return,
                }
            }
            let disrupted = if self.kind == ModelKind::Rm2 {
                let gamma = self.unc.expect("checked by caller").gamma_global;
                dp_from_costs(&costs, gamma)[n][gamma]
            } else {
                0
            };
            let w = &self.weights;
            let objective = w.alpha * served as f64 - w.beta * finish + w.mu * slack - w.nu * disrupted as f64;
            if best.as_ref().is_none_or(|b| objective > b.objective) {
                best = Some(Candidate {
                    objective,
                    teams: teams.clone(),
                    job_team: choice.iter().skip(1).map(|c| c.map(|(t, _, _)| t)).collect(),
                });
            }
        };
        fn rec(
            j: usize,
            options: &[Vec<(usize, f64, u64)>],
            choice: &mut Vec<Option<(usize, f64, u64)>>,
            visit: &mut dyn FnMut(&[Option<(usize, f64, u64)>]),
        ) {
            if j == options.len() {
                visit(choice);
                return;
            }
            choice[j] = None;
            rec(j + 1, options, choice, visit);
            for &o in &options[j] {
                choice[j] = Some(o);
                rec(j + 1, options, choice, visit);
            }
            choice[j] = None;
        }
        rec(1, &options, &mut choice, &mut assign);
        best
    }
}

/// Optimal objective of `kind` and a plan attaining it, by enumeration.
pub fn exhaustive_solve(
    inst: &Instance,
    unc: Option<&UncertaintySpec>,
    kind: ModelKind,
    weights: &Weights,
) -> Result<(f64, Solution)> {
    weights.validate()?;
    if inst.n_jobs() > MAX_JOBS {
        return Err(Error::SizeGuard {
            what: "jobs",
            limit: MAX_JOBS,
            actual: inst.n_jobs(),
        });
    }
    if inst.n_employees() > MAX_EMPLOYEES {
        return Err(Error::SizeGuard {
            what: "employees",
            limit: MAX_EMPLOYEES,
            actual: inst.n_employees(),
        });
    }
    if kind != ModelKind::Dm {
        let u = unc.ok_or_else(|| Error::validation("uncertainty", format!("model {kind} needs an uncertainty specification")))?;
        u.validate(inst)?;
    }
    let rbar = match (kind, unc) {
        (ModelKind::Rm1, Some(u)) => inst
            .jobs()
            .map(|j| compute_rbar_block(inst.requirements_of(j), u.deviations_of(j), u.gamma_job))
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let bigm = BigM::for_instance(inst, unc);
    let ctx = Context {
        inst,
        unc,
        kind,
        weights: *weights,
        routes: best_routes(inst),
        rbar,
        rho_cap_rm1: bigm.rho_rm1,
        rho_cap_rm2: bigm.rho_rm2,
    };
    let partitions = team_partitions(inst.n_employees(), inst.team_bound());
    let best = partitions
        .par_iter()
        .enumerate()
        .filter_map(|(i, p)| ctx.best_for_partition(p).map(|c| (i, c)))
        .reduce_with(|a, b| {
            // Deterministic: higher objective, then earlier partition.
            if b.1.objective > a.1.objective || (b.1.objective == a.1.objective && b.0 < a.0) {
                b
            } else {
                a
            }
        })
        .map(|(_, c)| c)
        .expect("the empty plan is always feasible");

    let mut routes = vec![Vec::new(); inst.team_bound()];
    for (t, route) in routes.iter_mut().enumerate() {
        let mask = best
            .job_team
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Some(t))
            .fold(0u32, |m, (j, _)| m | 1 << j);
        *route = ctx.routes[mask as usize].as_ref().expect("feasible by construction").1.clone();
    }
    let mut sol = Solution::from_plan(inst, kind, &best.teams, &routes).with_max_slack(inst, unc)?;
    sol.verify(inst)?;
    Ok((best.objective, sol))
}

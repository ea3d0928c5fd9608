use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{compute_rbar_block, BigM, ModelKind};
use crate::error::{Error, Result};
use crate::instance::{Instance, UncertaintySpec};
use crate::milp::{SolveResult, SolveStatus, FEASIBILITY_TOL};

/// A constraint family violated by a decoded solution.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("family `{family}` violated: {detail}")]
pub struct VerificationError {
    /// Constraint-name prefix of the family (`c2` ... `c9`), or `shape` /
    /// `bounds` for malformed data.
    pub family: String,
    pub detail: String,
}

fn violation<T>(family: &str, detail: impl Into<String>) -> std::result::Result<T, VerificationError> {
    Err(VerificationError {
        family: family.to_string(),
        detail: detail.into(),
    })
}

/// Qualification slack, shaped per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "kebab-case")]
pub enum Slack {
    None,
    /// `rho[j - 1][t]`
    PerJobTeam(Vec<Vec<f64>>),
    /// `rho[j - 1][k][l][t]`
    PerCell(Vec<Vec<Vec<Vec<f64>>>>),
}

impl Slack {
    pub fn total(&self) -> f64 {
        match self {
            Slack::None => 0.0,
            Slack::PerJobTeam(v) => v.iter().flatten().sum(),
            Slack::PerCell(v) => v.iter().flatten().flatten().flatten().sum(),
        }
    }
}

/// Path-dual values of the second robust model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustDuals {
    /// `u[j][g]` for `j` in `0..=|J|`.
    pub u: Vec<Vec<f64>>,
    /// `v[j - 1][g]`
    pub v: Vec<Vec<bool>>,
}

impl RobustDuals {
    pub fn gamma(&self) -> usize {
        self.u.first().map_or(0, |r| r.len().saturating_sub(1))
    }

    /// `u[|J|][Γ]`, the number of jobs the adversary is charged for.
    pub fn final_value(&self) -> f64 {
        self.u.last().and_then(|r| r.last()).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub runtime_seconds: f64,
}

impl From<&SolveResult> for SolveMeta {
    fn from(r: &SolveResult) -> Self {
        Self {
            status: r.status,
            objective: r.objective_value,
            bound: r.bound,
            gap: r.gap,
            runtime_seconds: r.runtime_seconds,
        }
    }
}

/// A team formation, routing and schedule.
///
/// Jobs are 1-based throughout; node 0 is the depot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub kind: ModelKind,
    pub n_teams: usize,
    /// `assignment[m][t]`
    pub assignment: Vec<Vec<bool>>,
    /// `arcs[t][i][j]` over depot and jobs.
    pub arcs: Vec<Vec<Vec<bool>>>,
    /// `start[t][j]`; entry 0 is unused.
    pub start: Vec<Vec<f64>>,
    /// `finish[t][j]`; entry 0 is the depot departure time.
    pub finish: Vec<Vec<f64>>,
    /// Serving team of each performed job.
    pub performed: BTreeMap<usize, usize>,
    /// Job sequence of every team, starting after the depot.
    pub routes: Vec<Vec<usize>>,
    pub slack: Slack,
    pub duals: Option<RobustDuals>,
    pub meta: Option<SolveMeta>,
}

impl Solution {
    /// No teams and no jobs.
    pub fn empty(inst: &Instance, kind: ModelKind) -> Self {
        Self::from_plan(inst, kind, &[], &[])
    }

    /// Builds a solution from team members and routes, scheduling every job
    /// at its earliest start. Missing teams are left empty.
    ///
    /// The result is not verified; call [`Solution::verify`].
    pub fn from_plan(inst: &Instance, kind: ModelKind, teams: &[Vec<usize>], routes: &[Vec<usize>]) -> Self {
        let n_teams = inst.team_bound();
        let nodes = inst.n_jobs() + 1;
        let mut assignment = vec![vec![false; n_teams]; inst.n_employees()];
        for (t, members) in teams.iter().enumerate() {
            for &m in members {
                assignment[m][t] = true;
            }
        }
        let mut arcs = vec![vec![vec![false; nodes]; nodes]; n_teams];
        let mut start = vec![vec![0.0; nodes]; n_teams];
        let mut finish = vec![vec![0.0; nodes]; n_teams];
        let mut performed = BTreeMap::new();
        let mut all_routes = vec![Vec::new(); n_teams];
        for (t, route) in routes.iter().enumerate() {
            let mut prev = 0;
            let mut clock = 0.0;
            for &j in route {
                arcs[t][prev][j] = true;
                start[t][j] = clock + inst.travel(prev, j);
                clock = start[t][j] + inst.processing(j);
                finish[t][j] = clock;
                performed.insert(j, t);
                prev = j;
            }
            if prev != 0 {
                arcs[t][prev][0] = true;
            }
            all_routes[t] = route.clone();
        }
        Self {
            kind,
            n_teams,
            assignment,
            arcs,
            start,
            finish,
            performed,
            routes: all_routes,
            slack: Slack::None,
            duals: None,
            meta: None,
        }
    }

    /// Service level `Z`.
    pub fn performed_count(&self) -> usize {
        self.performed.len()
    }

    pub fn team_of(&self, job: usize) -> Option<usize> {
        self.performed.get(&job).copied()
    }

    pub fn members(&self, team: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&m| self.assignment[m][team])
            .collect()
    }

    /// Per-(skill, level) headcount of the team serving `job`.
    pub fn profile_of_job(&self, inst: &Instance, job: usize) -> Option<Vec<Vec<u32>>> {
        self.team_of(job).map(|t| inst.team_profile(&self.members(t)))
    }

    /// Teams serving at least one job.
    pub fn active_teams(&self) -> usize {
        self.routes.iter().filter(|r| !r.is_empty()).count()
    }

    /// Employees in teams that serve at least one job.
    pub fn active_employees(&self) -> usize {
        (0..self.n_teams)
            .filter(|&t| !self.routes[t].is_empty())
            .map(|t| self.members(t).len())
            .sum()
    }

    /// Sum of finish times over performed jobs.
    pub fn total_finish(&self) -> f64 {
        self.performed.iter().map(|(&j, &t)| self.finish[t][j]).sum::<f64>() + 0.0
    }

    /// Mean total nominal requirement over performed jobs (0 if none).
    pub fn complexity(&self, inst: &Instance) -> f64 {
        if self.performed.is_empty() {
            return 0.0;
        }
        let total: u32 = self.performed.keys().map(|&j| inst.requirement_total(j)).sum();
        f64::from(total) / self.performed.len() as f64
    }

    /// Fills the slack block with the largest values the model allows for
    /// this plan. The first robust model needs `unc` for its worst-case totals.
    pub fn with_max_slack(mut self, inst: &Instance, unc: Option<&UncertaintySpec>) -> Result<Self> {
        let teams = self.n_teams;
        self.slack = match self.kind {
            ModelKind::Dm => Slack::None,
            ModelKind::Rm1 => {
                let unc = unc.ok_or_else(|| Error::validation("uncertainty", "required for rm1 slack"))?;
                let cap = BigM::for_instance(inst, Some(unc)).rho_rm1;
                let mut rho = vec![vec![0.0; teams]; inst.n_jobs()];
                for (&j, &t) in &self.performed {
                    let quals: u32 = self.members(t).iter().map(|&m| inst.qualification_count(m)).sum();
                    let rbar = compute_rbar_block(inst.requirements_of(j), unc.deviations_of(j), unc.gamma_job)?;
                    rho[j - 1][t] = (f64::from(quals) - rbar as f64).clamp(0.0, cap);
                }
                Slack::PerJobTeam(rho)
            }
            ModelKind::Rm2 => {
                let cap = BigM::for_instance(inst, None).rho_rm2;
                let mut rho = vec![vec![vec![vec![0.0; teams]; inst.n_levels()]; inst.n_skills()]; inst.n_jobs()];
                for (&j, &t) in &self.performed {
                    let profile = inst.team_profile(&self.members(t));
                    for k in 0..inst.n_skills() {
                        for l in 0..inst.n_levels() {
                            let b = f64::from(profile[k][l]) - f64::from(inst.requirement(j, k, l));
                            rho[j - 1][k][l][t] = b.clamp(0.0, cap);
                        }
                    }
                }
                Slack::PerCell(rho)
            }
        };
        Ok(self)
    }

    /// Checks the plan against every deterministic constraint family,
    /// independently of any solver output, and rebuilds `performed` and
    /// `routes` from the arcs.
    pub fn verify(&mut self, inst: &Instance) -> std::result::Result<(), VerificationError> {
        let nodes = inst.n_jobs() + 1;
        let teams = inst.team_bound();
        if self.n_teams != teams
            || self.assignment.len() != inst.n_employees()
            || self.assignment.iter().any(|r| r.len() != teams)
            || self.arcs.len() != teams
            || self.arcs.iter().any(|a| a.len() != nodes || a.iter().any(|r| r.len() != nodes))
            || self.start.len() != teams
            || self.finish.len() != teams
            || self.start.iter().chain(&self.finish).any(|r| r.len() != nodes)
        {
            return violation("shape", format!("dimensions do not match an instance with {teams} teams"));
        }

        for (m, row) in self.assignment.iter().enumerate() {
            if row.iter().filter(|&&b| b).count() > 1 {
                return violation("c2", format!("employee {m} is in more than one team"));
            }
        }
        for t in 0..teams {
            for i in 0..nodes {
                if self.arcs[t][i][i] {
                    return violation("c7", format!("team {t} has a self-loop at node {i}"));
                }
            }
        }

        let mut served_by: BTreeMap<usize, usize> = BTreeMap::new();
        for j in inst.jobs() {
            let mut count = 0;
            for t in 0..teams {
                let into = (0..nodes).filter(|&i| self.arcs[t][i][j]).count();
                count += into;
                if into > 0 {
                    served_by.insert(j, t);
                }
            }
            if count > 1 {
                return violation("c5", format!("job {j} is entered {count} times"));
            }
        }

        for (&j, &t) in &served_by {
            let profile = inst.team_profile(&self.members(t));
            for k in 0..inst.n_skills() {
                for l in 0..inst.n_levels() {
                    if profile[k][l] < inst.requirement(j, k, l) {
                        return violation(
                            "c3",
                            format!(
                                "team {t} has {} of skill {k} level {l}, job {j} needs {}",
                                profile[k][l],
                                inst.requirement(j, k, l)
                            ),
                        );
                    }
                }
            }
        }

        for t in 0..teams {
            let out = (1..nodes).filter(|&j| self.arcs[t][0][j]).count();
            if out > 1 {
                return violation("c4", format!("team {t} leaves the depot {out} times"));
            }
        }

        for t in 0..teams {
            for j in 0..nodes {
                let into = (0..nodes).filter(|&i| self.arcs[t][i][j]).count();
                let out = (0..nodes).filter(|&i| self.arcs[t][j][i]).count();
                if into != out {
                    return violation("c6", format!("team {t} enters node {j} {into} times and leaves {out} times"));
                }
            }
        }

        let mut routes = vec![Vec::new(); teams];
        for t in 0..teams {
            let mut at = 0;
            while let Some(next) = (1..nodes).find(|&j| self.arcs[t][at][j]) {
                routes[t].push(next);
                at = next;
                if routes[t].len() > nodes {
                    break;
                }
            }
            let on_route = routes[t].len();
            let served = served_by.values().filter(|&&s| s == t).count();
            if on_route != served {
                let stray = served_by
                    .iter()
                    .find(|(j, &s)| s == t && !routes[t].contains(j))
                    .map(|(j, _)| *j)
                    .unwrap_or(0);
                // A cycle avoiding the depot cannot be timed: the chain of
                // precedence rows around it has no solution.
                return violation("c7", format!("team {t} serves job {stray} on a cycle not connected to the depot"));
            }
        }

        let tol = |x: f64| FEASIBILITY_TOL * (1.0 + x.abs());
        for t in 0..teams {
            for j in 0..nodes {
                let (s, f) = (self.start[t][j], self.finish[t][j]);
                if !(s.is_finite() && f.is_finite()) || s < -tol(0.0) || f < -tol(0.0) {
                    return violation("bounds", format!("team {t} node {j} has time ({s}, {f})"));
                }
            }
            for i in 0..nodes {
                for j in 1..nodes {
                    if self.arcs[t][i][j] {
                        let lhs = self.finish[t][i] + inst.travel(i, j);
                        if lhs > self.start[t][j] + tol(lhs) {
                            return violation(
                                "c7",
                                format!("team {t} reaches job {j} at {lhs} but starts it at {}", self.start[t][j]),
                            );
                        }
                    }
                }
            }
            for &j in &routes[t] {
                let lhs = self.start[t][j] + inst.processing(j);
                if lhs > self.finish[t][j] + tol(lhs) {
                    return violation("c8", format!("team {t} finishes job {j} at {} before {lhs}", self.finish[t][j]));
                }
            }
            for j in inst.jobs() {
                if self.finish[t][j] > inst.e_max() + tol(inst.e_max()) {
                    return violation("c9", format!("team {t} finishes job {j} at {}", self.finish[t][j]));
                }
            }
        }

        self.performed = served_by;
        self.routes = routes;
        Ok(())
    }
}

fn read_bool(result: &SolveResult, name: &str) -> bool {
    result.get(name) > 0.5
}

/// Turns solver output into a verified [`Solution`].
pub fn decode_solution(kind: ModelKind, inst: &Instance, result: &SolveResult) -> Result<Solution> {
    if !result.status.has_solution() || result.values.is_empty() {
        return Err(Error::NoSolution(result.status.to_string()));
    }
    let teams = inst.team_bound();
    let nodes = inst.n_jobs() + 1;
    let assignment = (0..inst.n_employees())
        .map(|m| (0..teams).map(|t| read_bool(result, &format!("x_{m}_{t}"))).collect())
        .collect();
    let arcs = (0..teams)
        .map(|t| {
            (0..nodes)
                .map(|i| {
                    (0..nodes)
                        .map(|j| i != j && read_bool(result, &format!("z_{t}_{i}_{j}")))
                        .collect()
                })
                .collect()
        })
        .collect();
    let start = (0..teams)
        .map(|t| (0..nodes).map(|j| if j == 0 { 0.0 } else { result.get(&format!("s_{t}_{j}")) }).collect())
        .collect();
    let finish = (0..teams)
        .map(|t| (0..nodes).map(|j| result.get(&format!("f_{t}_{j}"))).collect())
        .collect();
    let slack = match kind {
        ModelKind::Dm => Slack::None,
        ModelKind::Rm1 => Slack::PerJobTeam(
            inst.jobs()
                .map(|j| (0..teams).map(|t| result.get(&format!("rho_{j}_{t}"))).collect())
                .collect(),
        ),
        ModelKind::Rm2 => Slack::PerCell(
            inst.jobs()
                .map(|j| {
                    (0..inst.n_skills())
                        .map(|k| {
                            (0..inst.n_levels())
                                .map(|l| (0..teams).map(|t| result.get(&format!("rho_{j}_{k}_{l}_{t}"))).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        ),
    };
    let duals = (kind == ModelKind::Rm2).then(|| {
        let gamma = (0..).take_while(|g| result.value(&format!("u_0_{g}")).is_some()).count();
        RobustDuals {
            u: (0..nodes)
                .map(|j| (0..gamma).map(|g| result.get(&format!("u_{j}_{g}"))).collect())
                .collect(),
            v: inst
                .jobs()
                .map(|j| (0..gamma).map(|g| read_bool(result, &format!("v_{j}_{g}"))).collect())
                .collect(),
        }
    });
    let mut sol = Solution {
        kind,
        n_teams: teams,
        assignment,
        arcs,
        start,
        finish,
        performed: BTreeMap::new(),
        routes: vec![Vec::new(); teams],
        slack,
        duals,
        meta: Some(SolveMeta::from(result)),
    };
    sol.verify(inst)?;
    Ok(sol)
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} plan serving {} jobs", self.kind.label(), self.performed_count())?;
        for (t, route) in self.routes.iter().enumerate().filter(|(_, r)| !r.is_empty()) {
            write!(f, "; team {t} {:?} -> {route:?}", self.members(t))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three jobs in a line, two fully qualified employees.
    fn line_instance() -> Instance {
        let travel = vec![
            vec![0.0, 10.0, 20.0, 30.0],
            vec![10.0, 0.0, 10.0, 20.0],
            vec![20.0, 10.0, 0.0, 10.0],
            vec![30.0, 20.0, 10.0, 0.0],
        ];
        Instance::new(
            1,
            1,
            200.0,
            travel,
            vec![30.0, 30.0, 30.0],
            vec![vec![vec![1]], vec![vec![1]], vec![vec![2]]],
            vec![vec![vec![true]], vec![vec![true]]],
        )
        .unwrap()
    }

    #[test]
    fn empty_plan_verifies() {
        let inst = line_instance();
        let mut sol = Solution::empty(&inst, ModelKind::Dm);
        sol.verify(&inst).unwrap();
        assert_eq!(sol.performed_count(), 0);
        assert_eq!(sol.total_finish(), 0.0);
    }

    #[test]
    fn earliest_start_schedule() {
        let inst = line_instance();
        let mut sol = Solution::from_plan(&inst, ModelKind::Dm, &[vec![0], vec![1]], &[vec![1, 2], vec![]]);
        sol.verify(&inst).unwrap();
        assert_eq!(sol.finish[0][1], 40.0);
        assert_eq!(sol.start[0][2], 50.0);
        assert_eq!(sol.total_finish(), 40.0 + 80.0);
        assert_eq!(sol.active_teams(), 1);
        assert_eq!(sol.complexity(&inst), 1.0);
    }

    #[test]
    fn under_qualified_team_is_rejected() {
        let inst = line_instance();
        let mut sol = Solution::from_plan(&inst, ModelKind::Dm, &[vec![0]], &[vec![3]]);
        assert_eq!(sol.verify(&inst).unwrap_err().family, "c3");
    }

    #[test]
    fn detached_cycle_is_rejected_as_timing() {
        let inst = line_instance();
        let mut sol = Solution::from_plan(&inst, ModelKind::Dm, &[vec![0], vec![1]], &[vec![1], vec![]]);
        sol.arcs[1][2][3] = true;
        sol.arcs[1][3][2] = true;
        sol.assignment[1][1] = true;
        let err = sol.verify(&inst).unwrap_err();
        assert_eq!(err.family, "c3");
        // Give team 1 both employees so only the routing is wrong.
        sol.assignment[0][0] = false;
        sol.assignment[0][1] = true;
        sol.arcs[0] = vec![vec![false; 4]; 4];
        let err = sol.verify(&inst).unwrap_err();
        assert_eq!(err.family, "c7");
        assert!(err.detail.contains("not connected"));
    }

    #[test]
    fn late_finish_and_double_service() {
        let inst = line_instance();
        let mut sol = Solution::from_plan(&inst, ModelKind::Dm, &[vec![0]], &[vec![1]]);
        sol.finish[0][1] = 500.0;
        assert_eq!(sol.verify(&inst).unwrap_err().family, "c9");
        let mut sol = Solution::from_plan(&inst, ModelKind::Dm, &[vec![0], vec![1]], &[vec![1], vec![1]]);
        assert_eq!(sol.verify(&inst).unwrap_err().family, "c5");
        let mut sol = Solution::from_plan(&inst, ModelKind::Dm, &[vec![0]], &[vec![1]]);
        sol.assignment[0][1] = true;
        assert_eq!(sol.verify(&inst).unwrap_err().family, "c2");
        let mut sol = Solution::from_plan(&inst, ModelKind::Dm, &[vec![0]], &[vec![1]]);
        sol.start[0][1] = 5.0;
        assert_eq!(sol.verify(&inst).unwrap_err().family, "c7");
    }

    #[test]
    fn json_roundtrip() {
        let inst = line_instance();
        let sol = Solution::from_plan(&inst, ModelKind::Rm2, &[vec![0, 1]], &[vec![3]])
            .with_max_slack(&inst, None)
            .unwrap();
        let text = serde_json::to_string(&sol).unwrap();
        let back: Solution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sol);
        assert_eq!(sol.slack.total(), 0.0);
    }
}

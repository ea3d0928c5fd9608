//! Realized requirement scenarios and their effect on a fixed plan.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{rng, Instance, UncertaintySpec};
use crate::models::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Per-job budget: a number of cells per job deviate by their full `r_hat`.
    Rm1,
    /// Global cost budget spent on unit increases across all jobs.
    Rm2,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Rm1 => "rm1",
            ScenarioKind::Rm2 => "rm2",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rm1" => Ok(ScenarioKind::Rm1),
            "rm2" => Ok(ScenarioKind::Rm2),
            other => Err(format!("unknown scenario kind `{other}` (expected rm1 or rm2)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetUsed {
    /// Deviating cells per job.
    PerJob(Vec<usize>),
    Global { budget: usize, spent: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    /// `realized[j - 1][k][l]`
    pub realized: Vec<Vec<Vec<u32>>>,
    pub kind: ScenarioKind,
    pub budget_used: BudgetUsed,
    pub seed: u64,
}

impl Scenario {
    pub fn realized(&self, job: usize, skill: usize, level: usize) -> u32 {
        self.realized[job - 1][skill][level]
    }

    /// Whether every cell is at least the corresponding cell of `other`.
    pub fn dominates(&self, other: &Scenario) -> bool {
        self.realized
            .iter()
            .flatten()
            .flatten()
            .zip(other.realized.iter().flatten().flatten())
            .all(|(a, b)| a >= b)
    }
}

/// Knobs of the global-budget generator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rm2Generation {
    /// Never raise a cell above `r + r_hat`.
    pub cap_rhat: bool,
    /// Stop at the first pick the remaining budget cannot pay for. The picks
    /// do not depend on the budget, so a larger budget with the same seed
    /// extends the same sequence of increases.
    pub nested: bool,
}

/// For each job, `gamma_job` distinct cells chosen uniformly deviate by
/// their full `r_hat`.
///
/// Each job draws a full random order of its cells and takes a prefix, so
/// scenarios with the same seed are nested in the budget.
pub fn gen_scenario_rm1(inst: &Instance, unc: &UncertaintySpec, gamma_job: usize, seed: u64) -> Result<Scenario> {
    let cells: Vec<(usize, usize)> = (0..inst.n_skills())
        .flat_map(|k| (0..inst.n_levels()).map(move |l| (k, l)))
        .collect();
    if gamma_job > cells.len() {
        return Err(Error::BudgetOutOfRange {
            budget: gamma_job,
            max: cells.len(),
        });
    }
    let mut rng = rng(seed);
    let mut realized: Vec<Vec<Vec<u32>>> = inst.jobs().map(|j| inst.requirements_of(j).to_vec()).collect();
    for j in inst.jobs() {
        let mut order = cells.clone();
        order.shuffle(&mut rng);
        for &(k, l) in &order[..gamma_job] {
            realized[j - 1][k][l] += unc.deviation(j, k, l);
        }
    }
    Ok(Scenario {
        realized,
        kind: ScenarioKind::Rm1,
        budget_used: BudgetUsed::PerJob(vec![gamma_job; inst.n_jobs()]),
        seed,
    })
}

/// Spends a global budget on unit increases: jobs are visited in a random
/// cyclic order, each visit picks a skill and a level uniformly and buys the
/// increase if its cost fits. Ends when no increasable cell is affordable
/// (or, in nested mode, at the first unaffordable pick).
pub fn gen_scenario_rm2(inst: &Instance, unc: &UncertaintySpec, budget: usize, seed: u64, opts: Rm2Generation) -> Scenario {
    let mut rng = rng(seed);
    let mut realized: Vec<Vec<Vec<u32>>> = inst.jobs().map(|j| inst.requirements_of(j).to_vec()).collect();
    let mut order: Vec<usize> = inst.jobs().collect();
    order.shuffle(&mut rng);
    let mut remaining = budget as u64;

    let increasable = |realized: &Vec<Vec<Vec<u32>>>, j: usize, k: usize, l: usize| {
        !opts.cap_rhat || realized[j - 1][k][l] < inst.requirement(j, k, l) + unc.deviation(j, k, l)
    };
    let cheapest_open = |realized: &Vec<Vec<Vec<u32>>>| {
        inst.jobs()
            .flat_map(|j| (0..inst.n_skills()).flat_map(move |k| (0..inst.n_levels()).map(move |l| (j, k, l))))
            .filter(|&(j, k, l)| increasable(realized, j, k, l))
            .map(|(j, k, l)| u64::from(unc.cost(j, k, l)))
            .min()
    };

    'cycle: loop {
        for &j in &order {
            match cheapest_open(&realized) {
                Some(c) if opts.nested || c <= remaining => {}
                _ => break 'cycle,
            }
            let k = rng.gen_range(0..inst.n_skills());
            let l = rng.gen_range(0..inst.n_levels());
            if !increasable(&realized, j, k, l) {
                continue;
            }
            let c = u64::from(unc.cost(j, k, l));
            if c <= remaining {
                realized[j - 1][k][l] += 1;
                remaining -= c;
            } else if opts.nested {
                break 'cycle;
            }
        }
    }
    Scenario {
        realized,
        kind: ScenarioKind::Rm2,
        budget_used: BudgetUsed::Global {
            budget,
            spent: budget as u64 - remaining,
        },
        seed,
    }
}

/// Per-job outcome of a plan under a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `A_s`
    pub survived: usize,
    pub per_job: BTreeMap<usize, bool>,
}

impl Evaluation {
    /// `A_s / Z`, or `None` for an empty plan.
    pub fn ratio(&self) -> Option<f64> {
        (!self.per_job.is_empty()).then(|| self.survived as f64 / self.per_job.len() as f64)
    }
}

/// A performed job survives if its team still covers every realized cell.
/// Jobs are judged independently; a failed job is simply skipped.
///
/// `sol` is assumed to be a verified plan.
pub fn evaluate_scenario(sol: &Solution, scen: &Scenario, inst: &Instance) -> Evaluation {
    let mut profiles: BTreeMap<usize, Vec<Vec<u32>>> = BTreeMap::new();
    let mut per_job = BTreeMap::new();
    for (&j, &t) in &sol.performed {
        let profile = profiles.entry(t).or_insert_with(|| inst.team_profile(&sol.members(t)));
        let ok = (0..inst.n_skills()).all(|k| (0..inst.n_levels()).all(|l| profile[k][l] >= scen.realized(j, k, l)));
        per_job.insert(j, ok);
    }
    Evaluation {
        survived: per_job.values().filter(|&&ok| ok).count(),
        per_job,
    }
}

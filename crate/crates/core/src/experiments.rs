//! Simulation study: solve every model on a batch of instances, replay the
//! same demand scenarios against all plans, and aggregate the results per
//! instance set. Budget sweeps keep the plans fixed and vary the scenario
//! budget with common random numbers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{derive_seed, generate_uncertainty, Instance, UncertaintySpec};
use crate::milp::{self, SolveStatus, SolverBackend};
use crate::models::{build_model, decode_solution, ModelKind, Rm2Options, Solution, Weights};
use crate::scenario::{evaluate_scenario, gen_scenario_rm1, gen_scenario_rm2, Rm2Generation, Scenario, ScenarioKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub weights: Weights,
    /// Per-job budget used when solving the first robust model.
    pub gamma_job: usize,
    /// Global budget for solving the second robust model, as a multiple of `|J|`.
    pub gamma_global_per_job: usize,
    pub time_limit_seconds: f64,
    /// Per-model overrides of `time_limit_seconds`.
    pub model_time_limits: BTreeMap<ModelKind, f64>,
    pub n_scenarios: usize,
    pub seed: u64,
    /// Per-job budget of the first scenario family.
    pub rm1_scenario_gamma: usize,
    /// Global budget of the second scenario family, as a multiple of `|J|`.
    pub rm2_scenario_per_job: usize,
    pub models: Vec<ModelKind>,
    pub rm2_options: Rm2Options,
    pub generation: Rm2Generation,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            weights: Weights::default(),
            gamma_job: crate::instance::DEFAULT_GAMMA_JOB,
            gamma_global_per_job: crate::instance::DEFAULT_GAMMA_GLOBAL_PER_JOB,
            time_limit_seconds: 3600.0,
            model_time_limits: BTreeMap::new(),
            n_scenarios: 1000,
            seed: 42,
            rm1_scenario_gamma: 3,
            rm2_scenario_per_job: 10,
            models: ModelKind::ALL.to_vec(),
            rm2_options: Rm2Options::default(),
            generation: Rm2Generation::default(),
        }
    }
}

/// One instance of a study, with any plans already available.
#[derive(Debug, Clone)]
pub struct StudyInstance {
    pub name: String,
    /// Instance set the instance is aggregated into.
    pub set: String,
    pub instance: Instance,
    pub uncertainty: Option<UncertaintySpec>,
    pub cached: BTreeMap<ModelKind, Solution>,
}

impl StudyInstance {
    pub fn new(name: impl Into<String>, instance: Instance) -> Self {
        let set = format!("{}x{}", instance.n_jobs(), instance.n_employees());
        Self {
            name: name.into(),
            set,
            instance,
            uncertainty: None,
            cached: BTreeMap::new(),
        }
    }

    pub fn with_uncertainty(mut self, unc: UncertaintySpec) -> Self {
        self.uncertainty = Some(unc);
        self
    }
}

/// Solve outcome of one model on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub instance: String,
    pub set: String,
    pub model: ModelKind,
    pub status: Option<SolveStatus>,
    pub objective: Option<f64>,
    pub z: usize,
    /// `None` when no job is performed.
    pub c: Option<f64>,
    pub t: usize,
    pub e: usize,
    pub f: f64,
    pub cpu: f64,
    /// Relative gap in percent.
    pub gap: Option<f64>,
    pub error: Option<String>,
}

/// Outcome of one scenario for one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub instance: String,
    pub set: String,
    pub family: ScenarioKind,
    pub scenario_id: usize,
    pub seed: u64,
    pub model: ModelKind,
    pub z: usize,
    pub a: usize,
}

impl ScenarioRow {
    pub fn ratio(&self) -> Option<f64> {
        (self.z > 0).then(|| self.a as f64 / self.z as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveAggregate {
    pub instances: usize,
    pub missing: usize,
    pub z: f64,
    pub c: Option<f64>,
    pub t: f64,
    pub e: f64,
    pub f: f64,
    pub cpu: f64,
    pub gap: Option<f64>,
    pub optimal: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationAggregate {
    pub scenarios: usize,
    /// Mean surviving jobs.
    pub a: f64,
    /// Mean `A / Z` in percent over scenarios with `Z > 0`.
    pub r: Option<f64>,
    /// Percent of paired scenarios where this plan keeps more jobs than DM.
    pub b: Option<f64>,
    /// Percent of paired scenarios where it keeps fewer.
    pub w: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub set: String,
    pub instances: Vec<String>,
    pub solve: BTreeMap<ModelKind, SolveAggregate>,
    pub simulation: BTreeMap<ScenarioKind, BTreeMap<ModelKind, SimulationAggregate>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: StudyConfig,
    pub sets: Vec<SetReport>,
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub report: MetricsReport,
    pub solves: Vec<SolveRecord>,
    pub scenarios: Vec<ScenarioRow>,
    /// Plans per instance name.
    pub solutions: BTreeMap<String, BTreeMap<ModelKind, Solution>>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Uncertainty used for an instance: the supplied one, or one generated
/// from the study seed and the instance position.
pub fn uncertainty_for(item: &StudyInstance, index: usize, seed: u64) -> UncertaintySpec {
    item.uncertainty
        .clone()
        .unwrap_or_else(|| generate_uncertainty(&item.instance, derive_seed(seed, &[index as u64, 0])))
}

/// Builds, solves and decodes one model with the study budgets.
pub fn solve_model(
    kind: ModelKind,
    inst: &Instance,
    unc: &UncertaintySpec,
    cfg: &StudyConfig,
    backend: &dyn SolverBackend,
) -> Result<Solution> {
    let unc = unc.with_budgets(cfg.gamma_job, cfg.gamma_global_per_job * inst.n_jobs());
    let model = build_model(kind, inst, Some(&unc), &cfg.weights, cfg.rm2_options)?;
    let limit = cfg.model_time_limits.get(&kind).copied().unwrap_or(cfg.time_limit_seconds);
    let result = milp::solve(&model, backend, limit)?;
    decode_solution(kind, inst, &result)
}

fn record(item: &StudyInstance, kind: ModelKind, outcome: &Result<Solution>) -> SolveRecord {
    let mut rec = SolveRecord {
        instance: item.name.clone(),
        set: item.set.clone(),
        model: kind,
        status: None,
        objective: None,
        z: 0,
        c: None,
        t: 0,
        e: 0,
        f: 0.0,
        cpu: 0.0,
        gap: None,
        error: None,
    };
    match outcome {
        Ok(sol) => {
            rec.z = sol.performed_count();
            rec.c = (rec.z > 0).then(|| sol.complexity(&item.instance));
            rec.t = sol.active_teams();
            rec.e = sol.active_employees();
            rec.f = sol.total_finish();
            if let Some(meta) = &sol.meta {
                rec.status = Some(meta.status);
                rec.objective = meta.objective;
                rec.cpu = meta.runtime_seconds;
                rec.gap = meta.gap.map(|g| 100.0 * g);
            }
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

fn scenario_for(
    family: ScenarioKind,
    inst: &Instance,
    unc: &UncertaintySpec,
    budget: usize,
    seed: u64,
    generation: Rm2Generation,
) -> Result<Scenario> {
    match family {
        ScenarioKind::Rm1 => gen_scenario_rm1(inst, unc, budget, seed),
        ScenarioKind::Rm2 => Ok(gen_scenario_rm2(inst, unc, budget, seed, generation)),
    }
}

fn family_index(family: ScenarioKind) -> u64 {
    match family {
        ScenarioKind::Rm1 => 1,
        ScenarioKind::Rm2 => 2,
    }
}

/// Seed of scenario `s` of a family on instance `index`. It does not depend
/// on the budget, so sweeps reuse the same random numbers at every budget.
pub fn scenario_seed(base: u64, index: usize, family: ScenarioKind, s: usize) -> u64 {
    derive_seed(base, &[index as u64, family_index(family), s as u64])
}

/// Replays `n` scenarios of a family against every plan of one instance.
#[allow(clippy::too_many_arguments)]
fn simulate_instance(
    item: &StudyInstance,
    index: usize,
    unc: &UncertaintySpec,
    plans: &BTreeMap<ModelKind, Solution>,
    family: ScenarioKind,
    budget: usize,
    n: usize,
    seed: u64,
    generation: Rm2Generation,
) -> Result<Vec<ScenarioRow>> {
    let per_scenario: Vec<Vec<ScenarioRow>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let sseed = scenario_seed(seed, index, family, s);
            let scen = scenario_for(family, &item.instance, unc, budget, sseed, generation)?;
            Ok(plans
                .iter()
                .map(|(&model, sol)| ScenarioRow {
                    instance: item.name.clone(),
                    set: item.set.clone(),
                    family,
                    scenario_id: s,
                    seed: sseed,
                    model,
                    z: sol.performed_count(),
                    a: evaluate_scenario(sol, &scen, &item.instance).survived,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_scenario.into_iter().flatten().collect())
}

/// Solve-block aggregates from per-instance records.
pub fn aggregate_solves(records: &[SolveRecord]) -> BTreeMap<ModelKind, SolveAggregate> {
    let mut out = BTreeMap::new();
    for kind in ModelKind::ALL {
        let all: Vec<&SolveRecord> = records.iter().filter(|r| r.model == kind).collect();
        if all.is_empty() {
            continue;
        }
        let ok: Vec<&SolveRecord> = all.iter().copied().filter(|r| r.error.is_none()).collect();
        let avg = |f: &dyn Fn(&SolveRecord) -> f64| mean(ok.iter().map(|r| f(r))).unwrap_or(0.0);
        out.insert(
            kind,
            SolveAggregate {
                instances: all.len(),
                missing: all.len() - ok.len(),
                z: avg(&|r| r.z as f64),
                c: mean(ok.iter().filter_map(|r| r.c)),
                t: avg(&|r| r.t as f64),
                e: avg(&|r| r.e as f64),
                f: avg(&|r| r.f),
                cpu: avg(&|r| r.cpu),
                gap: mean(ok.iter().filter_map(|r| r.gap)),
                optimal: ok.iter().filter(|r| r.status == Some(SolveStatus::Optimal)).count(),
            },
        );
    }
    out
}

/// Simulation-block aggregates from raw scenario rows.
pub fn aggregate_scenarios(rows: &[ScenarioRow]) -> BTreeMap<ScenarioKind, BTreeMap<ModelKind, SimulationAggregate>> {
    let mut out: BTreeMap<ScenarioKind, BTreeMap<ModelKind, SimulationAggregate>> = BTreeMap::new();
    let mut dm: BTreeMap<(ScenarioKind, &str, usize), usize> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.model == ModelKind::Dm) {
        dm.insert((r.family, r.instance.as_str(), r.scenario_id), r.a);
    }
    for family in [ScenarioKind::Rm1, ScenarioKind::Rm2] {
        for kind in ModelKind::ALL {
            let mine: Vec<&ScenarioRow> = rows.iter().filter(|r| r.family == family && r.model == kind).collect();
            if mine.is_empty() {
                continue;
            }
            let paired: Vec<(usize, usize)> = mine
                .iter()
                .filter_map(|r| dm.get(&(family, r.instance.as_str(), r.scenario_id)).map(|&d| (r.a, d)))
                .collect();
            let pct = |n: usize| 100.0 * n as f64 / paired.len() as f64;
            let agg = SimulationAggregate {
                scenarios: mine.len(),
                a: mean(mine.iter().map(|r| r.a as f64)).unwrap_or(0.0),
                r: mean(mine.iter().filter_map(|r| r.ratio())).map(|x| 100.0 * x),
                b: (!paired.is_empty()).then(|| pct(paired.iter().filter(|(a, d)| a > d).count())),
                w: (!paired.is_empty()).then(|| pct(paired.iter().filter(|(a, d)| a < d).count())),
            };
            out.entry(family).or_default().insert(kind, agg);
        }
    }
    out
}

/// Solves every requested model on every instance (reusing cached plans),
/// replays both scenario families against all plans and aggregates per set.
///
/// A failed solve is recorded with its error and leaves that model out of
/// the simulation for the instance; the batch continues.
pub fn run_study(instances: &[StudyInstance], cfg: &StudyConfig, backend: &dyn SolverBackend) -> Result<StudyOutput> {
    if instances.is_empty() {
        return Err(Error::validation("instances", "at least one instance is required"));
    }
    cfg.weights.validate()?;
    let mut solves = Vec::new();
    let mut scenarios = Vec::new();
    let mut solutions = BTreeMap::new();
    for (index, item) in instances.iter().enumerate() {
        let unc = uncertainty_for(item, index, cfg.seed);
        let outcomes: Vec<(ModelKind, Result<Solution>)> = cfg
            .models
            .par_iter()
            .map(|&kind| {
                let outcome = match item.cached.get(&kind) {
                    Some(sol) => {
                        let mut sol = sol.clone();
                        sol.verify(&item.instance).map(|_| sol).map_err(Error::from)
                    }
                    None => solve_model(kind, &item.instance, &unc, cfg, backend),
                };
                (kind, outcome)
            })
            .collect();
        let mut plans = BTreeMap::new();
        for (kind, outcome) in outcomes {
            if let Err(e) = &outcome {
                log::warn!("{} {kind}: {e}", item.name);
            }
            solves.push(record(item, kind, &outcome));
            if let Ok(sol) = outcome {
                plans.insert(kind, sol);
            }
        }
        if cfg.n_scenarios > 0 && !plans.is_empty() {
            let rm2_budget = cfg.rm2_scenario_per_job * item.instance.n_jobs();
            for (family, budget) in [(ScenarioKind::Rm1, cfg.rm1_scenario_gamma), (ScenarioKind::Rm2, rm2_budget)] {
                scenarios.extend(simulate_instance(
                    item,
                    index,
                    &unc,
                    &plans,
                    family,
                    budget,
                    cfg.n_scenarios,
                    cfg.seed,
                    cfg.generation,
                )?);
            }
        }
        solutions.insert(item.name.clone(), plans);
    }

    let mut set_names: Vec<&str> = instances.iter().map(|i| i.set.as_str()).collect();
    set_names.dedup();
    set_names.sort_unstable();
    set_names.dedup();
    let sets = set_names
        .into_iter()
        .map(|set| {
            let recs: Vec<SolveRecord> = solves.iter().filter(|r| r.set == set).cloned().collect();
            let rows: Vec<ScenarioRow> = scenarios.iter().filter(|r| r.set == set).cloned().collect();
            SetReport {
                set: set.to_string(),
                instances: instances.iter().filter(|i| i.set == set).map(|i| i.name.clone()).collect(),
                solve: aggregate_solves(&recs),
                simulation: aggregate_scenarios(&rows),
            }
        })
        .collect();
    Ok(StudyOutput {
        report: MetricsReport {
            config: cfg.clone(),
            sets,
        },
        solves,
        scenarios,
        solutions,
    })
}

/// Raw per-scenario outcome of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub instance: String,
    pub model: ModelKind,
    /// Grid value (per-job budget, or multiple of `|J|` for the global budget).
    pub budget: usize,
    /// Budget handed to the generator.
    pub absolute_budget: usize,
    pub scenario_id: usize,
    pub seed: u64,
    pub a: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub budget: usize,
    pub model: ModelKind,
    pub avg_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: ScenarioKind,
    pub grid: Vec<usize>,
    pub series: Vec<SweepPoint>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Average surviving jobs of `model` along the grid.
    pub fn series_of(&self, model: ModelKind) -> Vec<f64> {
        self.series.iter().filter(|p| p.model == model).map(|p| p.avg_a).collect()
    }

    /// Count of (instance, model, scenario) triples whose surviving jobs
    /// increase somewhere along the grid.
    pub fn monotonicity_violations(&self) -> usize {
        let mut paths: BTreeMap<(&str, ModelKind, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for r in &self.rows {
            paths
                .entry((r.instance.as_str(), r.model, r.scenario_id))
                .or_default()
                .push((r.budget, r.a));
        }
        paths
            .into_values()
            .filter(|p| {
                let mut p = p.clone();
                p.sort_unstable();
                p.windows(2).any(|w| w[1].1 > w[0].1)
            })
            .count()
    }
}

/// The default grid: per-job budgets `0..=6`, or global multiples `0, 2, ..., 16`.
pub fn default_grid(kind: ScenarioKind) -> Vec<usize> {
    match kind {
        ScenarioKind::Rm1 => (0..=6).collect(),
        ScenarioKind::Rm2 => (0..=16).step_by(2).collect(),
    }
}

/// Replays scenarios at every grid budget against fixed plans.
///
/// Scenario seeds depend only on (instance, family, scenario), and the
/// global-budget generator runs in nested mode, so each scenario at a larger
/// budget dominates the same scenario at a smaller one.
pub fn run_sweep(
    instances: &[StudyInstance],
    plans: &BTreeMap<String, BTreeMap<ModelKind, Solution>>,
    kind: ScenarioKind,
    grid: &[usize],
    n_scenarios: usize,
    seed: u64,
    cap_rhat: bool,
) -> Result<SweepResult> {
    let generation = Rm2Generation { cap_rhat, nested: true };
    let mut rows = Vec::new();
    for (index, item) in instances.iter().enumerate() {
        let Some(mine) = plans.get(&item.name) else { continue };
        let unc = uncertainty_for(item, index, seed);
        for &g in grid {
            let absolute = match kind {
                ScenarioKind::Rm1 => g,
                ScenarioKind::Rm2 => g * item.instance.n_jobs(),
            };
            let got: Vec<Vec<SweepRow>> = (0..n_scenarios)
                .into_par_iter()
                .map(|s| {
                    let sseed = scenario_seed(seed, index, kind, s);
                    let scen = scenario_for(kind, &item.instance, &unc, absolute, sseed, generation)?;
                    Ok(mine
                        .iter()
                        .map(|(&model, sol)| SweepRow {
                            instance: item.name.clone(),
                            model,
                            budget: g,
                            absolute_budget: absolute,
                            scenario_id: s,
                            seed: sseed,
                            a: evaluate_scenario(sol, &scen, &item.instance).survived,
                        })
                        .collect())
                })
                .collect::<Result<_>>()?;
            rows.extend(got.into_iter().flatten());
        }
    }
    let mut series = Vec::new();
    for &g in grid {
        for model in ModelKind::ALL {
            if let Some(avg_a) = mean(rows.iter().filter(|r| r.budget == g && r.model == model).map(|r| r.a as f64)) {
                series.push(SweepPoint { budget: g, model, avg_a });
            }
        }
    }
    Ok(SweepResult {
        kind,
        grid: grid.to_vec(),
        series,
        rows,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Reads rows written by [`write_study_csv`] or [`write_sweep_csv`].
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

/// Writes `solves.csv` and `scenarios.csv` into `dir`.
pub fn write_study_csv(out: &StudyOutput, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("solves.csv"), &out.solves)?;
    write_csv(&dir.join("scenarios.csv"), &out.scenarios)
}

/// Writes the long-format series (`budget,model,avg_A`) to `path` and, when
/// given, the raw rows to `raw`.
pub fn write_sweep_csv(result: &SweepResult, path: impl AsRef<Path>, raw: Option<&Path>) -> Result<()> {
    #[derive(Serialize)]
    struct Line {
        budget: usize,
        model: String,
        #[serde(rename = "avg_A")]
        avg_a: f64,
    }
    let lines: Vec<Line> = result
        .series
        .iter()
        .map(|p| Line {
            budget: p.budget,
            model: p.model.label().to_string(),
            avg_a: p.avg_a,
        })
        .collect();
    write_csv(path.as_ref(), &lines)?;
    if let Some(raw) = raw {
        write_csv(raw, &result.rows)?;
    }
    Ok(())
}

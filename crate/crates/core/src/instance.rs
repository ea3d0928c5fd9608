//! Problem data: jobs, employees, skill/level requirements and the random
//! instance generator.
//!
//! Jobs are numbered `1..=n_jobs`; node `0` is the depot. Employees, skills and
//! levels are zero-based.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with stream indices (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    let mut h = base ^ 0x9E37_79B9_7F4A_7C15;
    for &s in stream {
        h = h.wrapping_add(s.wrapping_mul(0xBF58_476D_1CE4_E5B9) ^ 0x94D0_49BB_1331_11EB);
        h ^= h >> 30;
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 27;
        h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// On-disk layout of an instance. Field names are part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InstanceFile {
    n_jobs: usize,
    n_employees: usize,
    n_skills: usize,
    n_levels: usize,
    e_max: f64,
    travel: Vec<Vec<f64>>,
    processing: Vec<f64>,
    requirements: Vec<Vec<Vec<u32>>>,
    qualifications: Vec<Vec<Vec<u8>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "InstanceFile")]
pub struct Instance {
    n_jobs: usize,
    n_employees: usize,
    n_skills: usize,
    n_levels: usize,
    e_max: f64,
    travel: Vec<Vec<f64>>,
    processing: Vec<f64>,
    requirements: Vec<Vec<Vec<u32>>>,
    qualifications: Vec<Vec<Vec<bool>>>,
}

impl From<Instance> for InstanceFile {
    fn from(i: Instance) -> Self {
        InstanceFile {
            n_jobs: i.n_jobs,
            n_employees: i.n_employees,
            n_skills: i.n_skills,
            n_levels: i.n_levels,
            e_max: i.e_max,
            travel: i.travel,
            processing: i.processing,
            requirements: i.requirements,
            qualifications: i
                .qualifications
                .into_iter()
                .map(|m| {
                    m.into_iter()
                        .map(|k| k.into_iter().map(u8::from).collect())
                        .collect()
                })
                .collect(),
        }
    }
}

fn check_tensor<T>(
    field: &str,
    t: &[Vec<Vec<T>>],
    outer: usize,
    n_skills: usize,
    n_levels: usize,
) -> Result<()> {
    if t.len() != outer {
        return Err(Error::validation(
            field,
            format!("expected {outer} entries, found {}", t.len()),
        ));
    }
    for (a, row) in t.iter().enumerate() {
        if row.len() != n_skills {
            return Err(Error::validation(
                format!("{field}[{a}]"),
                format!("expected {n_skills} skills, found {}", row.len()),
            ));
        }
        for (k, levels) in row.iter().enumerate() {
            if levels.len() != n_levels {
                return Err(Error::validation(
                    format!("{field}[{a}][{k}]"),
                    format!("expected {n_levels} levels, found {}", levels.len()),
                ));
            }
        }
    }
    Ok(())
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        if f.n_jobs == 0 {
            return Err(Error::validation("n_jobs", "must be at least 1"));
        }
        if f.n_employees == 0 {
            return Err(Error::validation("n_employees", "must be at least 1"));
        }
        if f.n_skills == 0 || f.n_levels == 0 {
            return Err(Error::validation(
                "n_skills/n_levels",
                "must both be at least 1",
            ));
        }
        if !(f.e_max.is_finite() && f.e_max >= 0.0) {
            return Err(Error::validation("e_max", "must be finite and >= 0"));
        }
        let nodes = f.n_jobs + 1;
        if f.travel.len() != nodes {
            return Err(Error::validation(
                "travel",
                format!("expected {nodes} rows, found {}", f.travel.len()),
            ));
        }
        for (i, row) in f.travel.iter().enumerate() {
            if row.len() != nodes {
                return Err(Error::validation(
                    format!("travel[{i}]"),
                    format!("expected {nodes} columns, found {}", row.len()),
                ));
            }
            for (j, &d) in row.iter().enumerate() {
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::validation(
                        format!("travel[{i}][{j}]"),
                        format!("must be finite and >= 0, found {d}"),
                    ));
                }
            }
            if row[i] != 0.0 {
                return Err(Error::validation(
                    format!("travel[{i}][{i}]"),
                    "diagonal must be 0",
                ));
            }
        }
        if f.processing.len() != f.n_jobs {
            return Err(Error::validation(
                "processing",
                format!("expected {} entries, found {}", f.n_jobs, f.processing.len()),
            ));
        }
        for (j, &p) in f.processing.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::validation(
                    format!("processing[{j}]"),
                    format!("must be finite and >= 0, found {p}"),
                ));
            }
        }
        check_tensor("requirements", &f.requirements, f.n_jobs, f.n_skills, f.n_levels)?;
        check_tensor(
            "qualifications",
            &f.qualifications,
            f.n_employees,
            f.n_skills,
            f.n_levels,
        )?;
        let mut qualifications = Vec::with_capacity(f.n_employees);
        for (m, emp) in f.qualifications.iter().enumerate() {
            let mut rows = Vec::with_capacity(f.n_skills);
            for (k, levels) in emp.iter().enumerate() {
                let mut row = Vec::with_capacity(f.n_levels);
                for (l, &q) in levels.iter().enumerate() {
                    match q {
                        0 => row.push(false),
                        1 => row.push(true),
                        other => {
                            return Err(Error::validation(
                                format!("qualifications[{m}][{k}][{l}]"),
                                format!("must be 0 or 1, found {other}"),
                            ))
                        }
                    }
                }
                rows.push(row);
            }
            qualifications.push(rows);
        }
        Ok(Instance {
            n_jobs: f.n_jobs,
            n_employees: f.n_employees,
            n_skills: f.n_skills,
            n_levels: f.n_levels,
            e_max: f.e_max,
            travel: f.travel,
            processing: f.processing,
            requirements: f.requirements,
            qualifications,
        })
    }
}

impl Instance {
    /// Builds and validates an instance. `requirements` is indexed by job
    /// `0..n_jobs` (job `j` of the model is entry `j - 1`); `travel` includes
    /// the depot as row and column 0.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_skills: usize,
        n_levels: usize,
        e_max: f64,
        travel: Vec<Vec<f64>>,
        processing: Vec<f64>,
        requirements: Vec<Vec<Vec<u32>>>,
        qualifications: Vec<Vec<Vec<bool>>>,
    ) -> Result<Self> {
        InstanceFile {
            n_jobs: processing.len(),
            n_employees: qualifications.len(),
            n_skills,
            n_levels,
            e_max,
            travel,
            processing,
            requirements,
            qualifications: qualifications
                .into_iter()
                .map(|m| {
                    m.into_iter()
                        .map(|k| k.into_iter().map(u8::from).collect())
                        .collect()
                })
                .collect(),
        }
        .try_into()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: InstanceFile = serde_json::from_str(text)?;
        raw.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization is infallible")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn n_jobs(&self) -> usize {
        self.n_jobs
    }

    pub fn n_employees(&self) -> usize {
        self.n_employees
    }

    pub fn n_skills(&self) -> usize {
        self.n_skills
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    /// Maximum number of teams, `min(|M|, |J|)`.
    pub fn team_bound(&self) -> usize {
        self.n_employees.min(self.n_jobs)
    }

    /// Job indices `1..=n_jobs`.
    pub fn jobs(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_jobs
    }

    /// Node indices `0..=n_jobs`, depot first.
    pub fn nodes(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.n_jobs
    }

    pub fn travel(&self, from: usize, to: usize) -> f64 {
        self.travel[from][to]
    }

    pub fn processing(&self, job: usize) -> f64 {
        self.processing[job - 1]
    }

    pub fn requirement(&self, job: usize, skill: usize, level: usize) -> u32 {
        self.requirements[job - 1][skill][level]
    }

    /// The `|K| x |L|` requirement block of a job.
    pub fn requirements_of(&self, job: usize) -> &[Vec<u32>] {
        &self.requirements[job - 1]
    }

    /// Total headcount demanded by a job over all skills and levels.
    pub fn requirement_total(&self, job: usize) -> u32 {
        self.requirements[job - 1].iter().flatten().sum()
    }

    pub fn qualified(&self, employee: usize, skill: usize, level: usize) -> bool {
        self.qualifications[employee][skill][level]
    }

    /// Number of (skill, level) qualifications an employee holds.
    pub fn qualification_count(&self, employee: usize) -> u32 {
        self.qualifications[employee]
            .iter()
            .flatten()
            .filter(|&&q| q)
            .count() as u32
    }

    /// Per-(skill, level) headcount of a set of employees.
    pub fn team_profile(&self, members: &[usize]) -> Vec<Vec<u32>> {
        let mut profile = vec![vec![0u32; self.n_levels]; self.n_skills];
        for &m in members {
            for (k, row) in profile.iter_mut().enumerate() {
                for (l, cell) in row.iter_mut().enumerate() {
                    *cell += u32::from(self.qualifications[m][k][l]);
                }
            }
        }
        profile
    }

    /// Whether a team profile meets the nominal requirement of `job` in every cell.
    pub fn profile_covers(&self, profile: &[Vec<u32>], job: usize) -> bool {
        self.requirements_of(job)
            .iter()
            .zip(profile)
            .all(|(req, have)| req.iter().zip(have).all(|(r, h)| h >= r))
    }

    pub fn max_travel(&self) -> f64 {
        self.travel.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn max_processing(&self) -> f64 {
        self.processing.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_requirement(&self) -> u32 {
        self.requirements.iter().flatten().flatten().copied().max().unwrap_or(0)
    }
}

/// Parameters of the random instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub n_skills: usize,
    pub n_levels: usize,
    pub e_max: f64,
    /// Side length of the square on which job locations are drawn.
    pub grid: f64,
    pub processing_min: u32,
    pub processing_max: u32,
    /// Probability of a requirement cell taking value 0, 1, 2, ...
    pub requirement_probs: Vec<f64>,
    pub qualification_prob: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n_skills: 3,
            n_levels: 3,
            e_max: 540.0,
            grid: 100.0,
            processing_min: 30,
            processing_max: 120,
            requirement_probs: vec![0.5, 0.35, 0.15],
            qualification_prob: 0.4,
        }
    }
}

fn draw_categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> u32 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (v, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return v as u32;
        }
    }
    (probs.len() - 1) as u32
}

/// Draws a random instance. Travel times are the ceiling of Euclidean distances
/// between uniformly placed locations (depot at the center), which keeps the
/// triangle inequality intact.
pub fn generate_instance(
    n_jobs: usize,
    n_employees: usize,
    seed: u64,
    params: &GenerationConfig,
) -> Result<Instance> {
    if n_jobs == 0 || n_employees == 0 {
        return Err(Error::validation(
            "n_jobs/n_employees",
            "must both be at least 1",
        ));
    }
    if params.requirement_probs.is_empty() {
        return Err(Error::validation("requirement_probs", "must not be empty"));
    }
    let mut rng = rng(seed);
    let centre = params.grid / 2.0;
    let mut coords = vec![(centre, centre)];
    for _ in 0..n_jobs {
        coords.push((
            rng.gen_range(0.0..=params.grid),
            rng.gen_range(0.0..=params.grid),
        ));
    }
    let travel: Vec<Vec<f64>> = coords
        .iter()
        .enumerate()
        .map(|(i, a)| {
            coords
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    if i == j {
                        0.0
                    } else {
                        (a.0 - b.0).hypot(a.1 - b.1).ceil()
                    }
                })
                .collect()
        })
        .collect();
    let processing: Vec<f64> = (0..n_jobs)
        .map(|_| f64::from(rng.gen_range(params.processing_min..=params.processing_max)))
        .collect();

    let mut requirements = Vec::with_capacity(n_jobs);
    for _ in 0..n_jobs {
        // a job with no requirement at all could be "served" by an empty team
        loop {
            let block: Vec<Vec<u32>> = (0..params.n_skills)
                .map(|_| {
                    (0..params.n_levels)
                        .map(|_| draw_categorical(&mut rng, &params.requirement_probs))
                        .collect()
                })
                .collect();
            if block.iter().flatten().any(|&r| r > 0) {
                requirements.push(block);
                break;
            }
        }
    }
    let qualifications: Vec<Vec<Vec<bool>>> = (0..n_employees)
        .map(|_| {
            (0..params.n_skills)
                .map(|_| {
                    (0..params.n_levels)
                        .map(|_| rng.gen_bool(params.qualification_prob))
                        .collect()
                })
                .collect()
        })
        .collect();

    Instance::new(
        params.n_skills,
        params.n_levels,
        params.e_max,
        travel,
        processing,
        requirements,
        qualifications,
    )
}

/// Deviation, budget and disruption-cost data for the robust models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    /// Maximal deviation per requirement cell, indexed like `requirements`.
    pub r_hat: Vec<Vec<Vec<u32>>>,
    /// Per-job budget (number of cells allowed to deviate).
    pub gamma_job: usize,
    /// Global adversary budget.
    pub gamma_global: usize,
    /// Cost of raising a requirement cell by one unit.
    pub costs: Vec<Vec<Vec<u32>>>,
}

impl UncertaintySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("uncertainty serialization is infallible")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Checks dimensions and ranges against an instance.
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        check_tensor("r_hat", &self.r_hat, inst.n_jobs, inst.n_skills, inst.n_levels)?;
        check_tensor("costs", &self.costs, inst.n_jobs, inst.n_skills, inst.n_levels)?;
        let cells = inst.n_skills * inst.n_levels;
        if self.gamma_job > cells {
            return Err(Error::validation(
                "gamma_job",
                format!("must lie in [0, {cells}], found {}", self.gamma_job),
            ));
        }
        for (j, job) in self.costs.iter().enumerate() {
            for (k, row) in job.iter().enumerate() {
                for (l, &c) in row.iter().enumerate() {
                    if c == 0 {
                        return Err(Error::validation(
                            format!("costs[{j}][{k}][{l}]"),
                            "must be at least 1",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn deviation(&self, job: usize, skill: usize, level: usize) -> u32 {
        self.r_hat[job - 1][skill][level]
    }

    pub fn deviations_of(&self, job: usize) -> &[Vec<u32>] {
        &self.r_hat[job - 1]
    }

    pub fn cost(&self, job: usize, skill: usize, level: usize) -> u32 {
        self.costs[job - 1][skill][level]
    }

    /// Same data with both budgets replaced.
    pub fn with_budgets(&self, gamma_job: usize, gamma_global: usize) -> Self {
        Self {
            gamma_job,
            gamma_global,
            ..self.clone()
        }
    }

    /// Same data with every deviation set to zero.
    pub fn without_deviation(&self) -> Self {
        Self {
            r_hat: self
                .r_hat
                .iter()
                .map(|j| j.iter().map(|k| vec![0; k.len()]).collect())
                .collect(),
            ..self.clone()
        }
    }
}

/// Default per-job budget used when solving the first robust model.
pub const DEFAULT_GAMMA_JOB: usize = 4;

/// Default global budget for the second robust model: `per_job * |J|`.
pub const DEFAULT_GAMMA_GLOBAL_PER_JOB: usize = 2;

/// Deviation of `2` at the lowest level and `1` above it; disruption costs
/// drawn uniformly from `{2l + 1, 2l + 2}` for zero-based level `l`.
pub fn generate_uncertainty(inst: &Instance, seed: u64) -> UncertaintySpec {
    let mut rng = rng(seed);
    let r_hat = (0..inst.n_jobs)
        .map(|_| {
            (0..inst.n_skills)
                .map(|_| {
                    (0..inst.n_levels)
                        .map(|l| if l == 0 { 2 } else { 1 })
                        .collect()
                })
                .collect()
        })
        .collect();
    let costs = (0..inst.n_jobs)
        .map(|_| {
            (0..inst.n_skills)
                .map(|_| {
                    (0..inst.n_levels)
                        .map(|l| {
                            let low = 2 * l as u32 + 1;
                            *[low, low + 1].choose(&mut rng).expect("non-empty")
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    UncertaintySpec {
        r_hat,
        gamma_job: DEFAULT_GAMMA_JOB.min(inst.n_skills * inst.n_levels),
        gamma_global: DEFAULT_GAMMA_GLOBAL_PER_JOB * inst.n_jobs,
        costs,
    }
}

use super::{compute_rbar_block, ModelKind, Weights};
use crate::error::{Error, Result};
use crate::instance::{Instance, UncertaintySpec};
use crate::milp::{Cmp, MilpModel, ObjSense, VarId};

/// Big-M constants, each derived from instance bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigM {
    /// Scheduling rows: `e_max + max d + max p`.
    pub time: f64,
    /// RM1 slack gate: `|M| |K| |L|`.
    pub rho_rm1: f64,
    /// RM2 slack gate: `|M|`.
    pub rho_rm2: f64,
    /// RM2 disruption linking: `Γ + 1 + max r c`.
    pub disruption: f64,
}

impl BigM {
    pub fn for_instance(inst: &Instance, unc: Option<&UncertaintySpec>) -> Self {
        let disruption = unc.map_or(0.0, |u| {
            let max_rc = inst
                .jobs()
                .flat_map(|j| {
                    (0..inst.n_skills()).flat_map(move |k| {
                        (0..inst.n_levels()).map(move |l| (j, k, l))
                    })
                })
                .map(|(j, k, l)| u64::from(inst.requirement(j, k, l)) * u64::from(u.cost(j, k, l)))
                .max()
                .unwrap_or(0);
            (u.gamma_global as u64 + 1 + max_rc) as f64
        });
        Self {
            time: inst.e_max() + inst.max_travel() + inst.max_processing(),
            rho_rm1: (inst.n_employees() * inst.n_skills() * inst.n_levels()) as f64,
            rho_rm2: inst.n_employees() as f64,
            disruption,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Rm2Options {
    /// Restrict the path-dual rows to consecutive jobs (`j' = j + 1`).
    /// Optimal values are unchanged; the model is much smaller.
    pub prune_arcs: bool,
}

/// Handles to the variables shared by all three models.
struct Core {
    x: Vec<Vec<VarId>>,
    /// `z[t][i][j]`, `None` on the diagonal.
    z: Vec<Vec<Vec<Option<VarId>>>>,
    f: Vec<Vec<VarId>>,
    objective: Vec<(VarId, f64)>,
}

impl Core {
    /// `Σ_i z[t][i][j]`: 1 iff team `t` performs job `j`.
    fn visits(&self, t: usize, j: usize, coef: f64) -> Vec<(VarId, f64)> {
        self.z[t]
            .iter()
            .filter_map(|row| row[j].map(|v| (v, coef)))
            .collect()
    }
}

fn name_of(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Dm => "dm",
        ModelKind::Rm1 => "rm1",
        ModelKind::Rm2 => "rm2",
    }
}

/// Variables, objective terms and constraint families (2), (4)-(9); family
/// (3) only when `nominal_quals` is set (RM2 replaces it by slack rows).
fn build_core(m: &mut MilpModel, inst: &Instance, weights: &Weights, nominal_quals: bool) -> Result<Core> {
    weights.validate()?;
    let teams = inst.team_bound();
    let big = BigM::for_instance(inst, None).time;

    let x: Vec<Vec<VarId>> = (0..inst.n_employees())
        .map(|e| (0..teams).map(|t| m.add_binary(format!("x_{e}_{t}"))).collect())
        .collect::<Result<_>>()?;
    let mut z = Vec::with_capacity(teams);
    let mut s = Vec::with_capacity(teams);
    let mut f = Vec::with_capacity(teams);
    for t in 0..teams {
        let mut zt = Vec::new();
        for i in inst.nodes() {
            let mut row = Vec::new();
            for j in inst.nodes() {
                row.push(if i == j {
                    None
                } else {
                    Some(m.add_binary(format!("z_{t}_{i}_{j}"))?)
                });
            }
            zt.push(row);
        }
        z.push(zt);
        let mut st = Vec::new();
        let mut ft = vec![m.add_continuous(format!("f_{t}_0"), 0.0, f64::INFINITY)?];
        for j in inst.jobs() {
            st.push(m.add_continuous(format!("s_{t}_{j}"), 0.0, f64::INFINITY)?);
            ft.push(m.add_continuous(format!("f_{t}_{j}"), 0.0, f64::INFINITY)?);
        }
        s.push(st);
        f.push(ft);
    }
    let core = Core {
        x,
        z,
        f,
        objective: Vec::new(),
    };

    // (2) each employee in at most one team
    for e in 0..inst.n_employees() {
        m.add_constraint(format!("c2_{e}"), core.x[e].iter().map(|&v| (v, 1.0)), Cmp::Le, 1.0)?;
    }
    // (3) per-cell qualification
    if nominal_quals {
        for j in inst.jobs() {
            for k in 0..inst.n_skills() {
                for l in 0..inst.n_levels() {
                    let r = f64::from(inst.requirement(j, k, l));
                    for t in 0..teams {
                        let mut terms = qual_terms(inst, &core, t, k, l);
                        terms.extend(core.visits(t, j, -r));
                        m.add_constraint(format!("c3_{j}_{k}_{l}_{t}"), terms, Cmp::Ge, 0.0)?;
                    }
                }
            }
        }
    }
    for t in 0..teams {
        // (4) at most one departure from the depot
        let out: Vec<_> = inst.jobs().filter_map(|j| core.z[t][0][j].map(|v| (v, 1.0))).collect();
        m.add_constraint(format!("c4_{t}"), out, Cmp::Le, 1.0)?;
    }
    // (5) each job served at most once
    for j in inst.jobs() {
        let terms: Vec<_> = (0..teams).flat_map(|t| core.visits(t, j, 1.0)).collect();
        m.add_constraint(format!("c5_{j}"), terms, Cmp::Le, 1.0)?;
    }
    // (6) flow balance
    for t in 0..teams {
        for j in inst.nodes() {
            let mut terms = core.visits(t, j, 1.0);
            terms.extend(core.z[t][j].iter().filter_map(|v| v.map(|v| (v, -1.0))));
            m.add_constraint(format!("c6_{t}_{j}"), terms, Cmp::Eq, 0.0)?;
        }
    }
    for t in 0..teams {
        // (7) f_ti + d_ij <= s_tj + M (1 - z_tij)
        for i in inst.nodes() {
            for j in inst.jobs() {
                let Some(zv) = core.z[t][i][j] else { continue };
                m.add_constraint(
                    format!("c7_{t}_{i}_{j}"),
                    [(core.f[t][i], 1.0), (s[t][j - 1], -1.0), (zv, big)],
                    Cmp::Le,
                    big - inst.travel(i, j),
                )?;
            }
        }
        // (8) s_tj + p_j <= f_tj + M (1 - Σ_i z_tij)
        for j in inst.jobs() {
            let mut terms = vec![(s[t][j - 1], 1.0), (core.f[t][j], -1.0)];
            terms.extend(core.visits(t, j, big));
            m.add_constraint(format!("c8_{t}_{j}"), terms, Cmp::Le, big - inst.processing(j))?;
        }
        // (9) completion within the working horizon
        for j in inst.jobs() {
            m.add_constraint(format!("c9_{t}_{j}"), [(core.f[t][j], 1.0)], Cmp::Le, inst.e_max())?;
        }
    }

    let mut core = core;
    for t in 0..teams {
        for j in inst.jobs() {
            core.objective.extend(core.visits(t, j, weights.alpha));
            core.objective.push((core.f[t][j], -weights.beta));
        }
    }
    Ok(core)
}

/// `Σ_m q[m][k][l] x[m][t]`
fn qual_terms(inst: &Instance, core: &Core, t: usize, k: usize, l: usize) -> Vec<(VarId, f64)> {
    (0..inst.n_employees())
        .filter(|&e| inst.qualified(e, k, l))
        .map(|e| (core.x[e][t], 1.0))
        .collect()
}

/// Deterministic model: objective (1) with constraints (2)-(11).
pub fn build_dm(inst: &Instance, weights: &Weights) -> Result<MilpModel> {
    let mut m = MilpModel::new(name_of(ModelKind::Dm), ObjSense::Maximize);
    let core = build_core(&mut m, inst, weights, true)?;
    m.set_objective(ObjSense::Maximize, core.objective)?;
    Ok(m)
}

/// First robust model: DM plus the aggregated worst-case qualification row
/// per (job, team), whose surplus `rho_{j}_{t}` is rewarded with `mu`.
pub fn build_rm1(inst: &Instance, unc: &UncertaintySpec, weights: &Weights) -> Result<MilpModel> {
    unc.validate(inst)?;
    let mut m = MilpModel::new(name_of(ModelKind::Rm1), ObjSense::Maximize);
    let mut core = build_core(&mut m, inst, weights, true)?;
    let big = BigM::for_instance(inst, Some(unc)).rho_rm1;
    for j in inst.jobs() {
        let rbar = compute_rbar_block(inst.requirements_of(j), unc.deviations_of(j), unc.gamma_job)? as f64;
        for t in 0..inst.team_bound() {
            let rho = m.add_continuous(format!("rho_{j}_{t}"), 0.0, big)?;
            let mut terms: Vec<(VarId, f64)> = (0..inst.n_employees())
                .map(|e| (core.x[e][t], f64::from(inst.qualification_count(e))))
                .collect();
            terms.extend(core.visits(t, j, -rbar));
            terms.push((rho, -1.0));
            m.add_constraint(format!("rob_{j}_{t}"), terms, Cmp::Ge, 0.0)?;
            let mut gate = vec![(rho, 1.0)];
            gate.extend(core.visits(t, j, -big));
            m.add_constraint(format!("gate_{j}_{t}"), gate, Cmp::Le, 0.0)?;
            core.objective.push((rho, weights.mu));
        }
    }
    m.set_objective(ObjSense::Maximize, core.objective)?;
    Ok(m)
}

/// Second robust model: per-cell slack rows plus the dualized
/// longest-path adversary over budgets `0..=Γ`.
pub fn build_rm2(inst: &Instance, unc: &UncertaintySpec, weights: &Weights, opts: Rm2Options) -> Result<MilpModel> {
    unc.validate(inst)?;
    let mut m = MilpModel::new(name_of(ModelKind::Rm2), ObjSense::Maximize);
    let mut core = build_core(&mut m, inst, weights, false)?;
    let bigs = BigM::for_instance(inst, Some(unc));
    let teams = inst.team_bound();
    let gamma = unc.gamma_global;
    let n = inst.n_jobs();

    // (comp3)-(comp4)
    for j in inst.jobs() {
        for k in 0..inst.n_skills() {
            for l in 0..inst.n_levels() {
                let r = f64::from(inst.requirement(j, k, l));
                for t in 0..teams {
                    let rho = m.add_continuous(format!("rho_{j}_{k}_{l}_{t}"), 0.0, bigs.rho_rm2)?;
                    let mut terms = qual_terms(inst, &core, t, k, l);
                    terms.extend(core.visits(t, j, -r));
                    terms.push((rho, -1.0));
                    m.add_constraint(format!("comp3_{j}_{k}_{l}_{t}"), terms, Cmp::Ge, 0.0)?;
                    let mut gate = vec![(rho, 1.0)];
                    gate.extend(core.visits(t, j, -bigs.rho_rm2));
                    m.add_constraint(format!("comp4_{j}_{k}_{l}_{t}"), gate, Cmp::Le, 0.0)?;
                    core.objective.push((rho, weights.mu));
                }
            }
        }
    }

    let u: Vec<Vec<VarId>> = (0..=n)
        .map(|j| {
            (0..=gamma)
                .map(|g| m.add_continuous(format!("u_{j}_{g}"), 0.0, n as f64))
                .collect()
        })
        .collect::<Result<_>>()?;
    // v[j][g] for jobs 1..=n; index 0 unused
    let mut v: Vec<Vec<VarId>> = vec![Vec::new()];
    for j in inst.jobs() {
        v.push((0..=gamma).map(|g| m.add_binary(format!("v_{j}_{g}"))).collect::<Result<_>>()?);
    }

    // (comp7)
    m.add_constraint("comp7", [(u[0][0], 1.0)], Cmp::Eq, 0.0)?;
    // (comp8) u[j'][g'] >= u[j][g] + v[j'][g' - g]
    for j in 0..n {
        let targets = if opts.prune_arcs { j + 1..=j + 1 } else { j + 1..=n };
        for jp in targets {
            for g in 0..=gamma {
                for gp in g..=gamma {
                    m.add_constraint(
                        format!("comp8_{j}_{g}_{jp}_{gp}"),
                        [(u[jp][gp], 1.0), (u[j][g], -1.0), (v[jp][gp - g], -1.0)],
                        Cmp::Ge,
                        0.0,
                    )?;
                }
            }
        }
    }
    // (comp15) M (v_jg + 1 - Σ_i z_tij) >= g - (Σ_m q x - r + 1) c + 1
    let big = bigs.disruption;
    for g in 0..=gamma {
        for j in inst.jobs() {
            for k in 0..inst.n_skills() {
                for l in 0..inst.n_levels() {
                    let c = f64::from(unc.cost(j, k, l));
                    let r = f64::from(inst.requirement(j, k, l));
                    for t in 0..teams {
                        let mut terms = vec![(v[j][g], big)];
                        terms.extend(core.visits(t, j, -big));
                        terms.extend(qual_terms(inst, &core, t, k, l).into_iter().map(|(x, _)| (x, c)));
                        m.add_constraint(
                            format!("comp15_{g}_{j}_{k}_{l}_{t}"),
                            terms,
                            Cmp::Ge,
                            g as f64 + c * r - c + 1.0 - big,
                        )?;
                    }
                }
            }
        }
    }
    core.objective.push((u[n][gamma], -weights.nu));
    m.set_objective(ObjSense::Maximize, core.objective)?;
    Ok(m)
}

pub fn build_model(
    kind: ModelKind,
    inst: &Instance,
    unc: Option<&UncertaintySpec>,
    weights: &Weights,
    opts: Rm2Options,
) -> Result<MilpModel> {
    let need = || Error::validation("uncertainty", format!("model {kind} needs an uncertainty specification"));
    match kind {
        ModelKind::Dm => build_dm(inst, weights),
        ModelKind::Rm1 => build_rm1(inst, unc.ok_or_else(need)?, weights),
        ModelKind::Rm2 => build_rm2(inst, unc.ok_or_else(need)?, weights, opts),
    }
}

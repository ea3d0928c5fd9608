mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use robusteam::adversary::{self, BufferTable};
use robusteam::experiments::{self, StudyConfig, StudyInstance};
use robusteam::instance::{derive_seed, generate_instance, generate_uncertainty, GenerationConfig, Instance, UncertaintySpec};
use robusteam::milp::{self, lp};
use robusteam::models::{build_model, decode_solution, ModelKind, Rm2Options, Solution};
use robusteam::oracle::exhaustive_solve;
use robusteam::scenario::{evaluate_scenario, gen_scenario_rm1, gen_scenario_rm2, Rm2Generation, ScenarioKind};
use robusteam::Error;

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "robusteam", version, about = "Deterministic and robust team routing and scheduling")]
struct Cli {
    /// TOML file with default settings (flags take precedence).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// External solver command (overrides ROBUSTEAM_SOLVER_CMD).
    #[arg(long, global = true, value_name = "CMD")]
    solver_cmd: Option<String>,
    /// More log output; repeat for debug messages.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct WeightArgs {
    /// Reward per performed job.
    #[arg(long)]
    alpha: Option<f64>,
    /// Penalty per minute of completion time.
    #[arg(long)]
    beta: Option<f64>,
    /// Reward per unit of qualification slack.
    #[arg(long)]
    mu: Option<f64>,
    /// Penalty per job the adversary can disrupt.
    #[arg(long)]
    nu: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct BudgetArgs {
    /// Per-job budget (overrides the uncertainty file).
    #[arg(long)]
    gamma_job: Option<usize>,
    /// Global adversary budget (overrides the uncertainty file).
    #[arg(long)]
    gamma: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    /// dm, rm1 or rm2.
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    #[arg(long, value_name = "FILE")]
    instance: PathBuf,
    /// Required for rm1 and rm2.
    #[arg(long, value_name = "FILE")]
    uncertainty: Option<PathBuf>,
    /// Restrict path-dual rows to consecutive jobs (rm2).
    #[arg(long)]
    prune_arcs: bool,
    #[command(flatten)]
    budgets: BudgetArgs,
    #[command(flatten)]
    weights: WeightArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdversaryOracle {
    Dp,
    Brute,
    Milp,
    Path,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance (and optionally its uncertainty data).
    Generate {
        #[arg(long)]
        jobs: usize,
        #[arg(long)]
        employees: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, value_name = "FILE")]
        uncertainty_out: Option<PathBuf>,
        /// Seed of the cost draws (default: --seed).
        #[arg(long)]
        uncertainty_seed: Option<u64>,
    },
    /// Build a model and write it as an LP file.
    Build {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Build and solve a model; prints a JSON summary.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        /// Seconds (default 3600).
        #[arg(long)]
        time_limit: Option<f64>,
        /// Where to write the decoded solution as JSON.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Solve a tiny instance (at most 5 jobs and 5 employees) by enumeration.
    Oracle {
        #[arg(long, value_parser = parse_model)]
        model: ModelKind,
        #[arg(long, value_name = "FILE")]
        instance: PathBuf,
        #[arg(long, value_name = "FILE")]
        uncertainty: Option<PathBuf>,
        #[command(flatten)]
        budgets: BudgetArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Count the jobs of a plan an adversary can disrupt with a global budget.
    Adversary {
        #[arg(long, value_name = "FILE")]
        solution: PathBuf,
        #[arg(long, value_name = "FILE")]
        instance: PathBuf,
        #[arg(long, value_name = "FILE")]
        uncertainty: PathBuf,
        /// Budget (default: the global budget of the uncertainty file).
        #[arg(long)]
        gamma: Option<usize>,
        #[arg(long, value_enum, default_value = "dp")]
        oracle: AdversaryOracle,
    },
    /// Replay random demand scenarios against a plan; writes a CSV.
    Simulate {
        #[arg(long, value_name = "FILE")]
        solution: PathBuf,
        #[arg(long, value_name = "FILE")]
        instance: PathBuf,
        #[arg(long, value_name = "FILE")]
        uncertainty: PathBuf,
        /// rm1 (per-job cell budget) or rm2 (global cost budget).
        #[arg(long, value_parser = parse_scenario_kind)]
        kind: ScenarioKind,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Never raise a cell above its maximal deviation (rm2).
        #[arg(long)]
        cap_rhat: bool,
        /// Stop at the first unaffordable pick (rm2).
        #[arg(long)]
        nested: bool,
    },
    /// Solve all models on every instance of a directory and simulate.
    Study {
        /// Directory of `<name>.json` instances with optional `<name>.uncertainty.json`.
        #[arg(long, value_name = "DIR")]
        instances: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Where to write solves.csv, scenarios.csv and solutions/.
        #[arg(long, value_name = "DIR")]
        csv_dir: Option<PathBuf>,
        #[arg(long)]
        n_scenarios: Option<usize>,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of dm,rm1,rm2.
        #[arg(long, value_delimiter = ',', value_parser = parse_model)]
        models: Option<Vec<ModelKind>>,
        /// Global budget of rm2 solves as a multiple of |J|.
        #[arg(long)]
        gamma_per_job: Option<usize>,
        #[arg(long)]
        gamma_job: Option<usize>,
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Vary the scenario budget against fixed plans; writes budget,model,avg_A.
    Sweep {
        #[arg(long, value_name = "DIR")]
        instances: PathBuf,
        #[arg(long, value_parser = parse_scenario_kind)]
        kind: ScenarioKind,
        /// `a..b` (inclusive), `a..b:step` or `a,b,c`. For rm2 the values are
        /// multiples of |J| (default 0..16:2); for rm1 per-job budgets (default 0..6).
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write the per-scenario rows here.
        #[arg(long, value_name = "FILE")]
        raw: Option<PathBuf>,
        /// Directory with `<name>.<model>.json` plans; missing plans are solved.
        #[arg(long, value_name = "DIR")]
        solutions: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        cap_rhat: bool,
    },
    /// Reference external solver: solve an LP file and write a solution file.
    LpSolve {
        lp: PathBuf,
        solution: PathBuf,
        time_limit: f64,
    },
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn parse_scenario_kind(s: &str) -> Result<ScenarioKind, String> {
    s.parse()
}

fn parse_grid(s: &str) -> Result<Vec<usize>, String> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("bad grid value `{x}`"));
    if let Some((lo, rest)) = s.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((hi, step)) => (num(hi)?, num(step)?),
            None => (num(rest)?, 1),
        };
        let lo = num(lo)?;
        if step == 0 || hi < lo {
            return Err(format!("empty grid `{s}`"));
        }
        Ok((lo..=hi).step_by(step).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

/// Failures mapped to exit codes: 3 for bad input, 4 for solver trouble.
enum Failure {
    Input(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BackendMissing(_) | Error::BackendCrash(_) | Error::SolutionCheck { .. } | Error::NoSolution(_) => {
                Failure::Solver(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn input_err(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| input_err(format!("cannot write {}: {e}", path.display())))
}

fn load_solution(path: &Path) -> CliResult<Solution> {
    let text = fs::read_to_string(path).map_err(|e| input_err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input_err(format!("invalid solution {}: {e}", path.display())))
}

fn load_uncertainty(path: Option<&Path>, cfg: &RunConfig) -> CliResult<Option<UncertaintySpec>> {
    Ok(match path {
        Some(p) => Some(cfg.apply_budgets(&UncertaintySpec::load(p)?)),
        None => None,
    })
}

fn overrides(cli: &Cli, weights: &WeightArgs, budgets: &BudgetArgs) -> Overrides {
    Overrides {
        alpha: weights.alpha,
        beta: weights.beta,
        mu: weights.mu,
        nu: weights.nu,
        gamma_job: budgets.gamma_job,
        gamma_global: budgets.gamma,
        solver_cmd: cli.solver_cmd.clone(),
        threads: cli.threads,
        ..Default::default()
    }
}

fn solution_summary(sol: &Solution, inst: &Instance) -> serde_json::Value {
    let teams: Vec<_> = sol
        .routes
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_empty())
        .map(|(t, r)| json!({ "team": t, "members": sol.members(t), "jobs": r }))
        .collect();
    json!({
        "model": sol.kind,
        "performed_jobs": sol.performed_count(),
        "active_teams": sol.active_teams(),
        "assigned_employees": sol.active_employees(),
        "total_finish": sol.total_finish(),
        "complexity": (sol.performed_count() > 0).then(|| sol.complexity(inst)),
        "teams": teams,
    })
}

/// `<name>.json` instances in a directory, sorted by name, with optional
/// `<name>.uncertainty.json` companions.
fn load_instance_dir(dir: &Path) -> CliResult<Vec<StudyInstance>> {
    let entries = fs::read_dir(dir).map_err(|e| input_err(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".json") && !name.ends_with(".uncertainty.json")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(input_err(format!("no instance files in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("instance").to_string();
            let inst = Instance::load(&p).map_err(|e| input_err(format!("{}: {e}", p.display())))?;
            let mut item = StudyInstance::new(stem.clone(), inst);
            let unc_path = dir.join(format!("{stem}.uncertainty.json"));
            if unc_path.exists() {
                item = item.with_uncertainty(UncertaintySpec::load(&unc_path)?);
            }
            Ok(item)
        })
        .collect()
}

fn study_config(cfg: &RunConfig) -> StudyConfig {
    StudyConfig {
        weights: cfg.weights,
        gamma_job: cfg.study_gamma_job(),
        gamma_global_per_job: cfg.gamma_global_per_job,
        time_limit_seconds: cfg.time_limit,
        n_scenarios: cfg.n_scenarios,
        seed: cfg.seed,
        ..Default::default()
    }
}

fn solution_file(dir: &Path, instance: &str, model: ModelKind) -> PathBuf {
    dir.join(format!("{instance}.{model}.json"))
}

fn run(cli: Cli) -> CliResult {
    let none = (WeightArgs::default(), BudgetArgs::default());
    let (weights, budgets, extra) = match &cli.command {
        Command::Build { model, .. } => (&model.weights, &model.budgets, Overrides::default()),
        Command::Solve { model, time_limit, .. } => (
            &model.weights,
            &model.budgets,
            Overrides {
                time_limit: *time_limit,
                ..Default::default()
            },
        ),
        Command::Oracle { weights, budgets, .. } => (weights, budgets, Overrides::default()),
        Command::Study {
            weights,
            gamma_job,
            n_scenarios,
            time_limit,
            seed,
            ..
        } => (
            weights,
            &none.1,
            Overrides {
                gamma_job: *gamma_job,
                n_scenarios: *n_scenarios,
                time_limit: *time_limit,
                seed: *seed,
                ..Default::default()
            },
        ),
        Command::Sweep { n, seed, time_limit, .. } => (
            &none.0,
            &none.1,
            Overrides {
                n_scenarios: *n,
                seed: *seed,
                time_limit: *time_limit,
                ..Default::default()
            },
        ),
        Command::Simulate { n, seed, .. } => (
            &none.0,
            &none.1,
            Overrides {
                n_scenarios: *n,
                seed: *seed,
                ..Default::default()
            },
        ),
        _ => (&none.0, &none.1, Overrides::default()),
    };
    let mut flags = overrides(&cli, weights, budgets);
    flags.gamma_job = flags.gamma_job.or(extra.gamma_job);
    flags.time_limit = extra.time_limit;
    flags.seed = extra.seed;
    flags.n_scenarios = extra.n_scenarios;
    let cfg = RunConfig::from_sources(cli.config.as_deref(), &flags).map_err(Failure::Input)?;
    cfg.weights.validate()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| input_err(format!("cannot start {n} threads: {e}")))?;
    }
    let backend = || milp::default_backend(cfg.solver_cmd.as_deref()).map_err(Failure::from);

    match cli.command {
        Command::Generate {
            jobs,
            employees,
            seed,
            out,
            uncertainty_out,
            uncertainty_seed,
        } => {
            let inst = generate_instance(jobs, employees, seed, &GenerationConfig::default())?;
            inst.save(&out)?;
            if let Some(path) = uncertainty_out {
                let unc = generate_uncertainty(&inst, uncertainty_seed.unwrap_or(seed));
                cfg.apply_budgets(&unc).save(path)?;
            }
            print_json(&json!({ "jobs": jobs, "employees": employees, "teams": inst.team_bound(), "seed": seed }));
        }
        Command::Build { model, out } => {
            let inst = Instance::load(&model.instance)?;
            let unc = load_uncertainty(model.uncertainty.as_deref(), &cfg)?;
            let opts = Rm2Options {
                prune_arcs: model.prune_arcs,
            };
            let m = build_model(model.model, &inst, unc.as_ref(), &cfg.weights, opts)?;
            lp::emit_lp_file(&m, &out)?;
            print_json(&json!({
                "model": model.model,
                "variables": m.num_vars(),
                "binaries": m.num_binaries(),
                "constraints": m.constraints().len(),
            }));
        }
        Command::Solve { model, out, .. } => {
            let inst = Instance::load(&model.instance)?;
            let unc = load_uncertainty(model.uncertainty.as_deref(), &cfg)?;
            let opts = Rm2Options {
                prune_arcs: model.prune_arcs,
            };
            let m = build_model(model.model, &inst, unc.as_ref(), &cfg.weights, opts)?;
            let result = milp::solve(&m, backend()?.as_ref(), cfg.time_limit)?;
            if !result.status.has_solution() {
                print_json(&json!({ "model": model.model, "status": result.status, "bound": result.bound }));
                return Ok(());
            }
            let sol = decode_solution(model.model, &inst, &result)?;
            if let Some(path) = out {
                write_json(&path, &sol)?;
            }
            let mut summary = solution_summary(&sol, &inst);
            summary["status"] = json!(result.status);
            summary["objective"] = json!(result.objective_value);
            summary["bound"] = json!(result.bound);
            summary["gap"] = json!(result.gap);
            summary["runtime_seconds"] = json!(result.runtime_seconds);
            if let Some(d) = &sol.duals {
                summary["disrupted_jobs"] = json!(d.final_value());
            }
            print_json(&summary);
        }
        Command::Oracle {
            model,
            instance,
            uncertainty,
            out,
            ..
        } => {
            let inst = Instance::load(&instance)?;
            let unc = load_uncertainty(uncertainty.as_deref(), &cfg)?;
            let (objective, sol) = exhaustive_solve(&inst, unc.as_ref(), model, &cfg.weights)?;
            if let Some(path) = out {
                write_json(&path, &sol)?;
            }
            let mut summary = solution_summary(&sol, &inst);
            summary["objective"] = json!(objective);
            print_json(&summary);
        }
        Command::Adversary {
            solution,
            instance,
            uncertainty,
            gamma,
            oracle,
        } => {
            let inst = Instance::load(&instance)?;
            let mut unc = UncertaintySpec::load(&uncertainty)?;
            if let Some(g) = gamma.or(cfg.gamma_global) {
                unc = unc.with_budgets(unc.gamma_job, g);
            }
            let sol = load_solution(&solution)?;
            let (name, value) = match oracle {
                AdversaryOracle::Dp => ("dp", adversary::adversary_dp(&sol, &inst, &unc)?.0),
                AdversaryOracle::Brute => ("brute", adversary::adversary_bruteforce(&sol, &inst, &unc)?),
                AdversaryOracle::Milp => ("milp", adversary::adversary_milp(&sol, &inst, &unc, backend()?.as_ref())?),
                AdversaryOracle::Path => ("path", adversary::longest_path_value(&sol, &inst, &unc)?),
            };
            let table = BufferTable::from_solution(&sol, &inst, &unc);
            let costs: BTreeMap<String, u64> = table.disruption_cost.iter().map(|(j, c)| (j.to_string(), *c)).collect();
            print_json(&json!({
                "oracle": name,
                "gamma": unc.gamma_global,
                "disrupted_jobs": value,
                "performed_jobs": sol.performed_count(),
                "disruption_costs": costs,
            }));
        }
        Command::Simulate {
            solution,
            instance,
            uncertainty,
            kind,
            budget,
            out,
            cap_rhat,
            nested,
            ..
        } => {
            let inst = Instance::load(&instance)?;
            let unc = UncertaintySpec::load(&uncertainty)?;
            unc.validate(&inst)?;
            let mut sol = load_solution(&solution)?;
            sol.verify(&inst).map_err(Error::from)?;
            let generation = Rm2Generation { cap_rhat, nested };
            let mut w = csv::Writer::from_path(&out).map_err(|e| input_err(format!("cannot write {}: {e}", out.display())))?;
            w.write_record(["scenario_id", "seed", "A", "R"]).map_err(|e| input_err(e.to_string()))?;
            let z = sol.performed_count();
            let mut total = 0;
            for s in 0..cfg.n_scenarios {
                let seed = derive_seed(cfg.seed, &[s as u64]);
                let scen = match kind {
                    ScenarioKind::Rm1 => gen_scenario_rm1(&inst, &unc, budget, seed)?,
                    ScenarioKind::Rm2 => gen_scenario_rm2(&inst, &unc, budget, seed, generation),
                };
                let a = evaluate_scenario(&sol, &scen, &inst).survived;
                total += a;
                let r = if z > 0 { format!("{}", 100.0 * a as f64 / z as f64) } else { String::new() };
                w.write_record([s.to_string(), seed.to_string(), a.to_string(), r])
                    .map_err(|e| input_err(e.to_string()))?;
            }
            w.flush().map_err(|e| input_err(e.to_string()))?;
            let avg = if cfg.n_scenarios > 0 { total as f64 / cfg.n_scenarios as f64 } else { 0.0 };
            print_json(&json!({ "scenarios": cfg.n_scenarios, "planned_jobs": z, "avg_A": avg }));
        }
        Command::Study {
            instances,
            out,
            csv_dir,
            models,
            gamma_per_job,
            ..
        } => {
            let items = load_instance_dir(&instances)?;
            let mut scfg = study_config(&cfg);
            if let Some(m) = models {
                scfg.models = m;
            }
            if let Some(g) = gamma_per_job {
                scfg.gamma_global_per_job = g;
            }
            let output = experiments::run_study(&items, &scfg, backend()?.as_ref())?;
            if let Some(dir) = csv_dir {
                experiments::write_study_csv(&output, &dir)?;
                let sol_dir = dir.join("solutions");
                fs::create_dir_all(&sol_dir).map_err(Error::from)?;
                for (name, plans) in &output.solutions {
                    for (model, sol) in plans {
                        write_json(&solution_file(&sol_dir, name, *model), sol)?;
                    }
                }
            }
            match out {
                Some(path) => write_json(&path, &output.report)?,
                None => print_json(&output.report),
            }
        }
        Command::Sweep {
            instances,
            kind,
            grid,
            out,
            raw,
            solutions,
            cap_rhat,
            ..
        } => {
            let grid = match grid {
                Some(g) => parse_grid(&g).map_err(Failure::Input)?,
                None => experiments::default_grid(kind),
            };
            let mut items = load_instance_dir(&instances)?;
            if let Some(dir) = &solutions {
                for item in &mut items {
                    for model in ModelKind::ALL {
                        let path = solution_file(dir, &item.name, model);
                        if path.exists() {
                            item.cached.insert(model, load_solution(&path)?);
                        }
                    }
                }
            }
            let scfg = StudyConfig {
                n_scenarios: 0,
                ..study_config(&cfg)
            };
            let solved = experiments::run_study(&items, &scfg, backend()?.as_ref())?;
            let result = experiments::run_sweep(&items, &solved.solutions, kind, &grid, cfg.n_scenarios, cfg.seed, cap_rhat)?;
            experiments::write_sweep_csv(&result, &out, raw.as_deref())?;
            print_json(&result.series);
        }
        Command::LpSolve {
            lp,
            solution,
            time_limit,
        } => {
            let status = milp::solve_lp_file(&lp, &solution, time_limit)?;
            log::info!("{} solved: {status}", lp.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver error: {msg}");
            ExitCode::from(4)
        }
    }
}

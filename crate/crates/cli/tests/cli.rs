use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use robusteam::instance::{generate_instance, generate_uncertainty, GenerationConfig};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_robusteam");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("ROBUSTEAM_SOLVER_CMD")
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 3x3 instance with staff qualified often enough for a nontrivial plan.
fn staffed_instance(dir: &Path, name: &str, seed: u64) -> (PathBuf, PathBuf) {
    let cfg = GenerationConfig {
        qualification_prob: 0.7,
        ..Default::default()
    };
    let inst = generate_instance(3, 3, seed, &cfg).unwrap();
    let unc = generate_uncertainty(&inst, seed).with_budgets(2, 4);
    let (ip, up) = (dir.join(format!("{name}.json")), dir.join(format!("{name}.uncertainty.json")));
    inst.save(&ip).unwrap();
    unc.save(&up).unwrap();
    (ip, up)
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let (ua, ub) = (dir.path().join("a.u.json"), dir.path().join("b.u.json"));
    for (p, u) in [(&a, &ua), (&b, &ub)] {
        let v = ok_json(&["generate", "--jobs", "5", "--employees", "4", "--seed", "9", "--out", s(p), "--uncertainty-out", s(u)]);
        assert_eq!(v["jobs"], 5);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(&ua).unwrap(), fs::read(&ub).unwrap());
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["solve", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let (inst, _) = staffed_instance(dir.path(), "x", 1);
    // Robust models need deviation data.
    assert_eq!(run(&["solve", "--model", "rm1", "--instance", s(&inst)]).status.code(), Some(3));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{ not json").unwrap();
    let out = run(&["solve", "--model", "dm", "--instance", s(&broken)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "tim_limit = 3\n").unwrap();
    assert_eq!(run(&["--config", s(&cfg), "solve", "--model", "dm", "--instance", s(&inst)]).status.code(), Some(3));

    // A solver command that does not exist is a backend failure.
    let out = run(&["--solver-cmd", "/nonexistent/solver", "solve", "--model", "dm", "--instance", s(&inst)]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn solve_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    for seed in [2, 5] {
        let (inst, unc) = staffed_instance(dir.path(), &format!("i{seed}"), seed);
        for model in ["dm", "rm1", "rm2"] {
            let args = ["--model", model, "--instance", s(&inst), "--uncertainty", s(&unc)];
            let solved = ok_json(&[&["solve"], &args[..]].concat());
            let oracle = ok_json(&[&["oracle"], &args[..]].concat());
            assert_eq!(solved["status"], "optimal");
            let (a, b) = (solved["objective"].as_f64().unwrap(), oracle["objective"].as_f64().unwrap());
            assert!((a - b).abs() <= 1e-6, "{model} seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn external_solver_through_lp_files() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, unc) = staffed_instance(dir.path(), "e", 4);
    let solver = format!("{BIN} lp-solve");
    for model in ["dm", "rm1", "rm2"] {
        let args = ["--model", model, "--instance", s(&inst), "--uncertainty", s(&unc)];
        let internal = ok_json(&[&["solve"], &args[..]].concat());
        let external = ok_json(&[&["--solver-cmd", &solver, "solve"], &args[..]].concat());
        let (a, b) = (internal["objective"].as_f64().unwrap(), external["objective"].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-6, "{model}: {a} vs {b}");
        assert_eq!(internal["performed_jobs"], external["performed_jobs"]);
    }
}

#[test]
fn build_writes_identical_lp_files() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, unc) = staffed_instance(dir.path(), "b", 6);
    let (a, b) = (dir.path().join("a.lp"), dir.path().join("b.lp"));
    for p in [&a, &b] {
        let v = ok_json(&["build", "--model", "rm2", "--instance", s(&inst), "--uncertainty", s(&unc), "--out", s(p)]);
        assert!(v["constraints"].as_u64().unwrap() > 0);
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.lines().any(|l| l == "Maximize"));
    assert!(text.trim_end().ends_with("End"));
}

#[test]
fn adversary_oracles_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, unc) = staffed_instance(dir.path(), "a", 8);
    let plan = dir.path().join("plan.json");
    ok_json(&["solve", "--model", "dm", "--instance", s(&inst), "--uncertainty", s(&unc), "--out", s(&plan)]);
    for gamma in ["0", "3", "9"] {
        let values: Vec<Value> = ["dp", "brute", "milp", "path"]
            .iter()
            .map(|o| {
                ok_json(&["adversary", "--solution", s(&plan), "--instance", s(&inst), "--uncertainty", s(&unc), "--gamma", gamma, "--oracle", o])
                    ["disrupted_jobs"]
                    .clone()
            })
            .collect();
        assert!(values.windows(2).all(|w| w[0] == w[1]), "gamma {gamma}: {values:?}");
    }
}

#[test]
fn simulate_writes_one_row_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, unc) = staffed_instance(dir.path(), "m", 3);
    let plan = dir.path().join("plan.json");
    ok_json(&["solve", "--model", "rm1", "--instance", s(&inst), "--uncertainty", s(&unc), "--out", s(&plan)]);
    let csv_path = dir.path().join("sim.csv");
    let base = ["simulate", "--solution", s(&plan), "--instance", s(&inst), "--uncertainty", s(&unc), "--n", "25", "--seed", "3", "--out", s(&csv_path)];
    let summary = ok_json(&[&base[..], &["--kind", "rm2", "--budget", "12"]].concat());
    assert_eq!(summary["scenarios"], 25);
    let text = fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("scenario_id,seed,A,R"));
    assert_eq!(lines.count(), 25);

    // Same seed, same rows.
    let again = dir.path().join("again.csv");
    let args: Vec<&str> = base.iter().map(|&a| if a == s(&csv_path) { s(&again) } else { a }).collect();
    ok_json(&[&args[..], &["--kind", "rm2", "--budget", "12"]].concat());
    assert_eq!(text, fs::read_to_string(&again).unwrap());
}

#[test]
fn study_and_sweep_on_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let inst_dir = dir.path().join("instances");
    fs::create_dir(&inst_dir).unwrap();
    for seed in [1, 2] {
        staffed_instance(&inst_dir, &format!("n{seed}"), seed);
    }
    let out_dir = dir.path().join("out");
    let report_path = dir.path().join("report.json");
    let status = run(&[
        "study", "--instances", s(&inst_dir), "--n-scenarios", "20", "--time-limit", "60", "--csv-dir", s(&out_dir), "--out", s(&report_path),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["sets"][0]["set"], "3x3");
    assert_eq!(report["sets"][0]["solve"]["dm"]["instances"], 2);
    for f in ["solves.csv", "scenarios.csv", "solutions/n1.rm2.json", "solutions/n2.dm.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }

    let sweep = dir.path().join("sweep.csv");
    ok_json(&[
        "sweep", "--instances", s(&inst_dir), "--kind", "rm1", "--grid", "0..3", "--n", "15", "--solutions", s(&out_dir.join("solutions")), "--out", s(&sweep),
    ]);
    let text = fs::read_to_string(&sweep).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("budget,model,avg_A"));
    assert_eq!(lines.count(), 4 * 3);
}

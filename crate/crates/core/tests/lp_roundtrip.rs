mod common;

use std::collections::BTreeMap;
use std::ffi::CString;

use proptest::prelude::*;

use robusteam::instance::{generate_instance, generate_uncertainty};
use robusteam::milp::{self, lp, Cmp, HighsBackend, MilpModel, ObjSense, VarKind};
use robusteam::models::{build_model, ModelKind, Rm2Options, Weights};

/// Optimum of an LP file as read by HiGHS' own parser.
fn highs_reads(path: &std::path::Path) -> f64 {
    let file = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let h = highs_sys::Highs_create();
        highs_sys::Highs_setBoolOptionValue(h, c"output_flag".as_ptr(), 0);
        highs_sys::Highs_setDoubleOptionValue(h, c"mip_rel_gap".as_ptr(), 0.0);
        highs_sys::Highs_setDoubleOptionValue(h, c"mip_abs_gap".as_ptr(), 0.0);
        assert_eq!(highs_sys::Highs_readModel(h, file.as_ptr()), highs_sys::kHighsStatusOk);
        highs_sys::Highs_run(h);
        assert_eq!(highs_sys::Highs_getModelStatus(h), highs_sys::kHighsModelStatusOptimal);
        let obj = highs_sys::Highs_getObjectiveValue(h);
        highs_sys::Highs_destroy(h);
        obj
    }
}

fn sorted_vars(m: &MilpModel) -> Vec<robusteam::milp::Variable> {
    let mut v = m.variables().to_vec();
    v.sort_by(|a, b| a.name.cmp(&b.name));
    v
}

type Row = (String, BTreeMap<String, f64>, String, f64);

fn rows_by_name(m: &MilpModel) -> Vec<Row> {
    m.constraints()
        .iter()
        .map(|c| {
            let terms = c.terms.iter().map(|&(v, a)| (m.variable(v).name.clone(), a)).collect();
            (c.name.clone(), terms, c.cmp.to_string(), c.rhs)
        })
        .collect()
}

/// `point` is keyed by name so models with different variable order compare.
fn at(m: &MilpModel, point: &BTreeMap<String, f64>) -> Vec<f64> {
    m.variables().iter().map(|v| point[&v.name]).collect()
}

#[test]
fn written_models_parse_back_identically() {
    let inst = generate_instance(3, 3, 7, &common::staffed()).unwrap();
    let unc = generate_uncertainty(&inst, 7);
    for kind in ModelKind::ALL {
        let m = build_model(kind, &inst, Some(&unc), &Weights::default(), Rm2Options::default()).unwrap();
        let text = lp::to_lp_string(&m);
        let back = lp::parse_lp(&text).unwrap();
        assert_eq!(sorted_vars(&back), sorted_vars(&m), "{kind}");
        assert_eq!(rows_by_name(&back), rows_by_name(&m), "{kind}");
        // Declaration order is not part of the format, but a second pass is stable.
        let again = lp::to_lp_string(&back);
        assert_eq!(lp::to_lp_string(&lp::parse_lp(&again).unwrap()), again, "{kind}");
    }
}

#[test]
fn highs_reads_our_files_to_the_same_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let backend = HighsBackend::default();
    for seed in [3, 11] {
        let inst = generate_instance(3, 3, seed, &common::staffed()).unwrap();
        let unc = generate_uncertainty(&inst, seed).with_budgets(2, 3);
        for kind in ModelKind::ALL {
            let m = build_model(kind, &inst, Some(&unc), &Weights::default(), Rm2Options::default()).unwrap();
            let path = dir.path().join(format!("{kind}_{seed}.lp"));
            lp::emit_lp_file(&m, &path).unwrap();
            let ours = milp::solve(&m, &backend, 120.0).unwrap().objective_value.unwrap();
            let theirs = highs_reads(&path);
            assert!((ours - theirs).abs() <= 1e-6, "{kind} seed {seed}: {ours} vs {theirs}");
        }
    }
}

fn small_model() -> impl Strategy<Value = (MilpModel, BTreeMap<String, f64>)> {
    let var = (any::<bool>(), -5i32..5, 0i32..6);
    let row = (prop::collection::vec((0usize..6, -9i32..10), 1..5), 0usize..3, -20i32..20);
    (
        prop::collection::vec(var, 1..6),
        prop::collection::vec(row, 0..5),
        prop::collection::vec(-9i32..10, 0..6),
        any::<bool>(),
        prop::collection::vec(0.0f64..1.0, 6),
    )
        .prop_map(|(vars, rows, obj, maximize, point)| {
            let sense = if maximize { ObjSense::Maximize } else { ObjSense::Minimize };
            let mut m = MilpModel::new("random", sense);
            let ids: Vec<_> = vars
                .iter()
                .enumerate()
                .map(|(i, &(binary, lo, width))| {
                    if binary {
                        m.add_binary(format!("b{i}")).unwrap()
                    } else {
                        m.add_var(format!("y{i}"), VarKind::Continuous, f64::from(lo), f64::from(lo + width))
                            .unwrap()
                    }
                })
                .collect();
            for (r, (terms, cmp, rhs)) in rows.into_iter().enumerate() {
                let cmp = [Cmp::Le, Cmp::Eq, Cmp::Ge][cmp];
                let terms = terms.into_iter().map(|(v, a)| (ids[v % ids.len()], f64::from(a) * 0.5));
                m.add_constraint(format!("r{r}"), terms, cmp, f64::from(rhs)).unwrap();
            }
            let obj = obj.into_iter().enumerate().map(|(i, a)| (ids[i % ids.len()], f64::from(a) * 0.25));
            m.set_objective(sense, obj).unwrap();
            let point = m.variables().iter().zip(point).map(|(v, x)| (v.name.clone(), x)).collect();
            (m, point)
        })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn text_format_preserves_the_model((m, point) in small_model()) {
        let back = lp::parse_lp(&lp::to_lp_string(&m)).unwrap();
        prop_assert_eq!(sorted_vars(&back), sorted_vars(&m));
        prop_assert_eq!(back.objective().sense, m.objective().sense);
        let (x, y) = (at(&m, &point), at(&back, &point));
        prop_assert!((back.objective_value(&y) - m.objective_value(&x)).abs() <= 1e-12);
        prop_assert_eq!(back.constraints().len(), m.constraints().len());
        for (a, b) in m.constraints().iter().zip(back.constraints()) {
            prop_assert_eq!(&a.name, &b.name);
            prop_assert!((a.activity(&x) - b.activity(&y)).abs() <= 1e-12);
            prop_assert!((a.violation(&x) - b.violation(&y)).abs() <= 1e-12);
        }
    }
}

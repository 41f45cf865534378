use gvr_core::experiments::reference::{reference_checks, DELTA_Q_MC_TOL};
use gvr_core::experiments::*;
use gvr_core::graph::QProvider;
use gvr_core::par::Exec;
use gvr_core::GvrError;

#[test]
fn partial_json_fills_from_preset() {
    let spec = ExperimentSpec::from_json(r#"{"kind": "epsilon_sweep", "grid": {"epsilon": [0.3, 0.9]}}"#).unwrap();
    let preset = ExperimentSpec::preset(ExperimentKind::EpsilonSweep);
    assert_eq!(spec.grid.epsilon, vec![0.3, 0.9]);
    assert_eq!(spec.game, preset.game);
    assert_eq!(spec.provider, preset.provider);

    let spec = ExperimentSpec::from_json(r#"{"kind": "stn_occupancy", "training": {"iterations": 10}}"#).unwrap();
    let t = spec.training.unwrap();
    assert_eq!(t.iterations, 10);
    assert_eq!(t.batch_size, occupancy_training().batch_size);
}

#[test]
fn nested_kind_change_replaces_preset_object() {
    let spec = ExperimentSpec::from_json(
        r#"{"kind": "transition_graph", "game": {"kind": "inline", "n": 2, "m": 2, "values": [1, 0, 0, 2]}}"#,
    )
    .unwrap();
    assert_eq!(spec.game, Some(GameSource::Inline { n: 2, m: 2, values: vec![1.0, 0.0, 0.0, 2.0] }));
}

fn schema_path(text: &str) -> String {
    match ExperimentSpec::from_json(text) {
        Err(GvrError::Schema { path, .. }) => path,
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn schema_errors_name_the_field() {
    assert_eq!(schema_path(r#"{"grid": {}}"#), "kind");
    assert_eq!(schema_path(r#"{"kind": "nope"}"#), "kind");
    assert_eq!(schema_path(r#"{"kind": "epsilon_sweep", "grid": {"epsilon": "x"}}"#), "grid.epsilon");
    assert_eq!(schema_path(r#"{"kind": "epsilon_sweep", "grid": {"epsilon": [0.2, 1.5]}}"#), "grid.epsilon[1]");
    assert_eq!(schema_path(r#"{"kind": "epsilon_sweep", "grid": {"epsilom": [0.2]}}"#), "grid.epsilom");
    assert_eq!(schema_path(r#"{"kind": "stn_occupancy", "training": {"batch_size": -1}}"#), "training.batch_size");
    assert_eq!(schema_path(r#"{"kind": "bounds_table", "grid": {"sizes": []}}"#), "grid.sizes");
}

#[test]
fn hash_is_stable_and_ignores_output_dir() {
    let a = ExperimentSpec::preset(ExperimentKind::BoundsTable);
    let mut b = ExperimentSpec::from_json(r#"{"kind": "bounds_table"}"#).unwrap();
    assert_eq!(a.hash(), b.hash());
    b.out = Some("/tmp/x".into());
    assert_eq!(a.hash(), b.hash());
    b.grid.alpha = vec![0.2];
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn analytic_kinds_rerun_byte_identical() {
    for kind in ExperimentKind::ALL.into_iter().filter(|k| k.is_analytic()) {
        let spec = ExperimentSpec::preset(kind);
        let a = run(&spec, Exec::Parallel).unwrap();
        let b = run(&spec, Exec::Sequential).unwrap();
        assert_eq!(a.table.to_csv(), b.table.to_csv(), "{}", kind.name());
        assert_eq!(a.attachments, b.attachments);
        let back = ResultTable::from_csv(kind.name(), &a.table.to_csv()).unwrap();
        assert_eq!(back.to_csv(), a.table.to_csv());
        assert!(compare_tables(&a.table, &back, 1e-6).unwrap().is_empty());
    }
}

#[test]
fn writes_the_full_output_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&ExperimentSpec::preset(ExperimentKind::TransitionGraph), Exec::Sequential).unwrap();
    let written = write_outputs(dir.path(), &out).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for f in ["transition_graph.csv", "transition_graph.meta.json", "transition_graph.plot.json", "transition_graph.svg"] {
        assert!(names.iter().any(|n| n == f), "{f} missing from {names:?}");
    }
    assert!(names.iter().any(|n| n.ends_with(".dot")));
    let csv = std::fs::read_to_string(dir.path().join("transition_graph.csv")).unwrap();
    assert!(csv.starts_with(&format!("# spec_hash={}", out.spec.hash())));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("transition_graph.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["spec_hash"], out.spec.hash());
}

#[test]
fn compare_refuses_foreign_hash_and_reports_drift() {
    let out = run(&ExperimentSpec::preset(ExperimentKind::BoundsTable), Exec::Sequential).unwrap();
    let mut other = out.table.clone();
    other.spec_hash = "0".repeat(64);
    assert!(compare_tables(&out.table, &other, 1.0).is_err());

    let mut drift = out.table.clone();
    let w0 = drift.column("w0").unwrap();
    drift.rows[0][w0] = Cell::Num(drift.rows[0][w0].as_f64().unwrap() + 0.1);
    assert_eq!(compare_tables(&out.table, &drift, 0.05).unwrap().len(), 1);
    assert!(compare_tables(&out.table, &drift, 0.2).unwrap().is_empty());
}

#[test]
fn empty_tables_plot_empty_series() {
    for kind in ExperimentKind::ALL {
        let p = emit_plot_data(&ResultTable::new(kind.name(), &[]), kind.name()).unwrap();
        assert!(p.series.iter().all(|s| s.x.is_empty()), "{}", kind.name());
    }
    assert!(emit_plot_data(&ResultTable::new("x", &[]), "fig9z").is_err());
}

#[test]
fn builtin_games_parse() {
    assert_eq!(builtin_game("tab2").unwrap(), builtin_game("fig1").unwrap());
    let g = builtin_game("randits:3x4:7").unwrap();
    assert_eq!((g.n, g.m), (3, 4));
    assert_eq!(g.values[0], RANDITS_OPTIMAL);
    assert_eq!(*g.values.last().unwrap(), RANDITS_GREEDY);
    assert_eq!(g, builtin_game("randits:3x4:7").unwrap());
    for bad in ["tab3", "randits:3x4", "randits:3by4:1", "randits:1x4:1", "randits:3x4:-1"] {
        assert!(builtin_game(bad).is_err(), "{bad}");
    }
}

#[test]
fn transition_graph_providers_agree_on_tab2() {
    let base = ExperimentSpec::preset(ExperimentKind::TransitionGraph);
    let stns = |p| {
        let spec = ExperimentSpec { provider: Some(p), ..base.clone() };
        let t = run(&spec, Exec::Sequential).unwrap().table;
        let c = t.column("is_stn").unwrap();
        t.rows.iter().map(|r| r[c].render()).collect::<Vec<_>>()
    };
    assert_eq!(stns(QProvider::ClosedForm), stns(QProvider::FixedPoint));
}

#[test]
fn its_delta_q_ignores_inferior_entries() {
    let out = run(&ExperimentSpec::preset(ExperimentKind::DeltaQVerification), Exec::Parallel).unwrap();
    let t = &out.table;
    let (src, seed, dq) = (t.column("source").unwrap(), t.column("seed").unwrap(), t.column("delta_q").unwrap());
    // Same training seed, different inferior entries.
    for s in 0..5 {
        let mc: Vec<f64> = t
            .rows
            .iter()
            .filter(|r| r[src].as_str() == Some("monte_carlo") && r[seed].as_f64() == Some(s as f64))
            .map(|r| r[dq].as_f64().unwrap())
            .collect();
        assert_eq!(mc.len(), 5);
        let spread = mc.iter().cloned().fold(f64::MIN, f64::max) - mc.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= DELTA_Q_MC_TOL, "seed {s}: {mc:?}");
    }
    let checks = reference_checks(&out.spec, t);
    assert!(checks.iter().any(|c| c.name.starts_with("Monte-Carlo") && c.pass), "{checks:#?}");
}

use gvr_core::experiments::{occupancy_training, scales_training};
use gvr_core::game::{make_paper_matrix_3x3, make_random_its_matrix, JointAction};
use gvr_core::learners::{gvr_train, stn_occupancy_experiment, EpsilonSchedule, GvrConfig, Variant};
use gvr_core::par::Exec;

#[test]
fn gvr_finds_the_optimum_on_small_games() {
    let mut returns = Vec::new();
    for seed in 0..5 {
        let (game, optimal, _) = make_random_its_matrix(2, 3, 8.0, 6.0, -20.0, 6.0, seed).unwrap();
        let rec = gvr_train(&game, &scales_training(), seed, 0).unwrap();
        assert_eq!(rec.reached_optimal, rec.final_greedy == optimal);
        returns.push(rec.final_test_return);
    }
    returns.sort_by(f64::total_cmp);
    assert_eq!(returns[2], 8.0, "{returns:?}");
}

#[test]
fn gvr_escapes_a_pinned_start_where_vdn_stays() {
    let (game, optimal, greedy) = make_random_its_matrix(2, 3, 8.0, 6.0, -20.0, 6.0, 1).unwrap();
    let base = GvrConfig {
        epsilon: EpsilonSchedule::Constant { epsilon: 0.5 },
        init_greedy: Some(greedy.clone()),
        ..occupancy_training()
    };
    let gvr = gvr_train(&game, &base, 3, 0).unwrap();
    assert_eq!(gvr.final_greedy, optimal);
    let vdn = gvr_train(&game, &GvrConfig { variant: Variant::Vdn, ..base }, 3, 0).unwrap();
    assert_ne!(vdn.final_greedy, optimal);
}

#[test]
fn degenerate_configs_are_rejected() {
    let g = make_paper_matrix_3x3();
    for cfg in [
        GvrConfig { alpha: 0.0, ..GvrConfig::default() },
        GvrConfig { alpha: -1.0, ..GvrConfig::default() },
        GvrConfig { epsilon: EpsilonSchedule::Constant { epsilon: 1.5 }, ..GvrConfig::default() },
        GvrConfig { fixed_greedy: Some(JointAction(vec![0, 3])), ..GvrConfig::default() },
        GvrConfig { n_c: 0, ..GvrConfig::default() },
    ] {
        assert!(gvr_train(&g, &cfg, 0, 0).is_err(), "{cfg:?}");
    }
}

#[test]
fn fixed_greedy_never_switches() {
    let g = make_paper_matrix_3x3();
    let cfg = GvrConfig { fixed_greedy: Some(JointAction(vec![2, 2])), iterations: 200, ..GvrConfig::default() };
    let rec = gvr_train(&g, &cfg, 0, 0).unwrap();
    assert_eq!(rec.greedy_switches, 0);
    assert!(rec.records.iter().all(|r| r.greedy == 8));
}

#[test]
fn occupancy_is_identical_across_backends() {
    let games: Vec<_> = (0..2).map(|s| make_random_its_matrix(3, 3, 7.8, 6.0, -20.0, 6.0, s).unwrap().0).collect();
    let cfg = GvrConfig { iterations: 150, ..occupancy_training() };
    let grid = [0.2, 0.6];
    let seq = stn_occupancy_experiment(&games, &grid, 4, &cfg, 9, Exec::Sequential).unwrap();
    let par = stn_occupancy_experiment(&games, &grid, 4, &cfg, 9, Exec::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq.rows.len(), 4);
    for r in &seq.rows {
        assert_eq!(r.optimal + r.non_optimal + r.flapping, r.trials);
    }
}

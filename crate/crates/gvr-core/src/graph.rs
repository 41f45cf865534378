//! Greedy transition diagram: one node per greedy joint action, successor = argmax of the
//! joint Q that node induces.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::closed_form::{
    its_fixed_point_with, joint_q_closed_form, FixedPointSystem, ItsAnchor, UtilityTables,
};
use crate::error::{GvrError, Result};
use crate::game::{argmax_tol, JointAction, PayoffMatrix, Shape};
use crate::par::{try_map_range, Exec};

/// Relative tolerance under which two joint Q values count as tied.
pub const TIE_TOL: f64 = 1e-9;
pub const DEFAULT_NODE_BUDGET: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QProvider {
    /// Two-agent closed form.
    ClosedForm,
    /// Linear fixed-point solve on the true payoffs (any n).
    FixedPoint,
    /// Fixed-point solve on ITS-shaped targets.
    Its { alpha: f64, e_q0: f64, anchor: ItsAnchor },
}

impl QProvider {
    pub fn its(alpha: f64, e_q0: f64) -> Self {
        QProvider::Its { alpha, e_q0, anchor: ItsAnchor::SelfConsistent }
    }

    pub fn its_anchored(alpha: f64, e_q0: f64) -> Self {
        QProvider::Its { alpha, e_q0, anchor: ItsAnchor::TrueGreedy }
    }
}

fn node_utilities(
    game: &PayoffMatrix,
    greedy: &JointAction,
    epsilon: f64,
    provider: QProvider,
) -> Result<UtilityTables> {
    let sys = FixedPointSystem::new(game.shape(), greedy, epsilon)?;
    match provider {
        QProvider::Its { alpha, e_q0, anchor } => {
            if !(alpha > 0.0 && e_q0 >= 0.0) {
                return Err(GvrError::Parameter(format!("bad ITS parameters alpha={alpha} e_Q0={e_q0}")));
            }
            Ok(its_fixed_point_with(&sys, game, greedy, alpha, e_q0, anchor)?.utilities)
        }
        _ => Ok(sys.solve(&game.values)),
    }
}

/// Joint Q over all joint actions when `greedy` is the current greedy action.
pub fn joint_q_table(
    game: &PayoffMatrix,
    greedy: &JointAction,
    epsilon: f64,
    provider: QProvider,
) -> Result<Vec<f64>> {
    game.check_action(greedy)?;
    if game.size() == 1 {
        return Ok(game.values.clone());
    }
    match provider {
        QProvider::ClosedForm => Ok(joint_q_closed_form(game, greedy, epsilon)?.concat()),
        _ => Ok(node_utilities(game, greedy, epsilon, provider)?.joint_table()),
    }
}

/// Successor of one node, as a joint-action index.
pub fn successor_of(game: &PayoffMatrix, greedy: &JointAction, epsilon: f64, provider: QProvider) -> Result<usize> {
    match provider {
        QProvider::ClosedForm => {
            let t = joint_q_table(game, greedy, epsilon, provider)?;
            Ok(argmax_tol(&t, TIE_TOL))
        }
        _ => {
            let u = node_utilities(game, greedy, epsilon, provider)?;
            Ok(game.shape().index(&u.greedy_tol(TIE_TOL).0))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Attractor {
    Stn(usize),
    /// Multi-node cycle, listed from its lowest index.
    Cycle(Vec<usize>),
    /// Successor chain leaves the enumerated node set.
    Escapes(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionGraph {
    pub n: usize,
    pub m: usize,
    /// Included nodes as joint-action indices, ascending.
    pub nodes: Vec<usize>,
    /// Successor of `nodes[i]`.
    pub successor: Vec<usize>,
    pub stn: Vec<bool>,
    pub optimal: usize,
}

#[derive(Serialize)]
struct GraphJson {
    nodes: Vec<JointAction>,
    successor: Vec<JointAction>,
    stn: Vec<bool>,
    optimal: JointAction,
    optimal_stn: bool,
}

impl TransitionGraph {
    fn shape(&self) -> Shape {
        Shape { n: self.n, m: self.m }
    }

    fn position(&self, idx: usize) -> Option<usize> {
        self.nodes.binary_search(&idx).ok()
    }

    pub fn action(&self, idx: usize) -> JointAction {
        self.shape().unindex(idx)
    }

    pub fn successor_of(&self, idx: usize) -> Option<usize> {
        self.position(idx).map(|p| self.successor[p])
    }

    pub fn is_stn(&self, idx: usize) -> bool {
        self.position(idx).is_some_and(|p| self.stn[p])
    }

    pub fn stns(&self) -> Vec<usize> {
        self.nodes.iter().zip(&self.stn).filter(|(_, &s)| s).map(|(&i, _)| i).collect()
    }

    pub fn optimal_is_stn(&self) -> bool {
        self.is_stn(self.optimal)
    }

    pub fn non_optimal_stns(&self) -> Vec<usize> {
        self.stns().into_iter().filter(|&i| i != self.optimal).collect()
    }

    /// Follows successors from `idx` until a node repeats.
    pub fn attractor(&self, idx: usize) -> Attractor {
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let mut path = Vec::new();
        let mut cur = idx;
        loop {
            if let Some(&start) = seen.get(&cur) {
                let mut cyc: Vec<usize> = path[start..].to_vec();
                if cyc.len() == 1 {
                    return Attractor::Stn(cyc[0]);
                }
                let lo = (0..cyc.len()).min_by_key(|&i| cyc[i]).unwrap_or(0);
                cyc.rotate_left(lo);
                return Attractor::Cycle(cyc);
            }
            let Some(next) = self.successor_of(cur) else {
                return Attractor::Escapes(cur);
            };
            seen.insert(cur, path.len());
            path.push(cur);
            cur = next;
        }
    }

    /// Distinct cycles longer than one node.
    pub fn oscillations(&self) -> Vec<Vec<usize>> {
        let mut out = BTreeSet::new();
        for &i in &self.nodes {
            if let Attractor::Cycle(c) = self.attractor(i) {
                out.insert(c);
            }
        }
        out.into_iter().collect()
    }

    pub fn to_json(&self) -> String {
        let s = self.shape();
        let doc = GraphJson {
            nodes: self.nodes.iter().map(|&i| s.unindex(i)).collect(),
            successor: self.successor.iter().map(|&i| s.unindex(i)).collect(),
            stn: self.stn.clone(),
            optimal: s.unindex(self.optimal),
            optimal_stn: self.optimal_is_stn(),
        };
        serde_json::to_string(&doc).expect("graph serializes")
    }

    pub fn to_dot(&self) -> String {
        let s = self.shape();
        let mut out = String::from("digraph transitions {\n  node [shape=box];\n");
        for (p, &i) in self.nodes.iter().enumerate() {
            let mut label = s.unindex(i).to_string();
            if self.stn[p] {
                label.push_str(" STN");
            }
            if i == self.optimal {
                label.push_str(" optimal");
            }
            let style = if self.stn[p] { ", style=bold" } else { "" };
            out.push_str(&format!("  n{i} [label=\"{label}\"{style}];\n"));
        }
        for (p, &i) in self.nodes.iter().enumerate() {
            out.push_str(&format!("  n{i} -> n{};\n", self.successor[p]));
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Debug)]
pub struct GraphOptions {
    pub budget: usize,
    /// Seeds for partial enumeration; `None` means single-deviation neighbours of the optimum.
    pub seeds: Option<Vec<JointAction>>,
    pub exec: Exec,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions { budget: DEFAULT_NODE_BUDGET, seeds: None, exec: Exec::default() }
    }
}

pub fn build_graph(game: &PayoffMatrix, epsilon: f64, provider: QProvider) -> Result<TransitionGraph> {
    build_graph_with(game, epsilon, provider, &GraphOptions::default())
}

pub fn build_graph_with(
    game: &PayoffMatrix,
    epsilon: f64,
    provider: QProvider,
    opts: &GraphOptions,
) -> Result<TransitionGraph> {
    let shape = game.shape();
    let optimal = argmax_tol(&game.values, 0.0);
    let (nodes, successor) = if game.size() <= opts.budget && opts.seeds.is_none() {
        let succ = try_map_range(opts.exec, game.size(), |i| {
            successor_of(game, &shape.unindex(i), epsilon, provider)
        })?;
        ((0..game.size()).collect::<Vec<_>>(), succ)
    } else {
        reachable(game, epsilon, provider, opts)?
    };
    let stn = nodes.iter().zip(&successor).map(|(a, b)| a == b).collect();
    Ok(TransitionGraph { n: game.n, m: game.m, nodes, successor, stn, optimal })
}

fn reachable(
    game: &PayoffMatrix,
    epsilon: f64,
    provider: QProvider,
    opts: &GraphOptions,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let shape = game.shape();
    let seeds: Vec<usize> = match &opts.seeds {
        Some(s) => s.iter().map(|u| shape.index(&u.0)).collect(),
        None => {
            let opt = shape.unindex(argmax_tol(&game.values, 0.0));
            let mut out = vec![shape.index(&opt.0)];
            for a in 0..shape.n {
                for k in 0..shape.m {
                    if k != opt.0[a] {
                        let mut u = opt.clone();
                        u.0[a] = k;
                        out.push(shape.index(&u.0));
                    }
                }
            }
            out
        }
    };
    let mut succ: HashMap<usize, usize> = HashMap::new();
    let mut frontier: Vec<usize> = seeds.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    while !frontier.is_empty() {
        if succ.len() + frontier.len() > opts.budget {
            return Err(GvrError::Budget { nodes: succ.len() + frontier.len(), budget: opts.budget });
        }
        let next = try_map_range(opts.exec, frontier.len(), |i| {
            successor_of(game, &shape.unindex(frontier[i]), epsilon, provider)
        })?;
        let mut new = BTreeSet::new();
        for (&f, &s) in frontier.iter().zip(&next) {
            succ.insert(f, s);
        }
        for s in next {
            if !succ.contains_key(&s) {
                new.insert(s);
            }
        }
        frontier = new.into_iter().collect();
    }
    let mut nodes: Vec<usize> = succ.keys().copied().collect();
    nodes.sort_unstable();
    let successor = nodes.iter().map(|i| succ[i]).collect();
    Ok((nodes, successor))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// 𝒬(u_s) ≤ 𝒬(ú) requires Q(u_s) < Q(ú).
    One,
    /// 𝒬(u_s) > 𝒬(ú) requires Q(u_s) > Q(ú).
    Two,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub action: JointAction,
    pub condition: Condition,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub greedy: JointAction,
    pub entries: Vec<ConditionEntry>,
    pub condition1_all: bool,
    pub condition2_all: bool,
}

pub fn check_conditions(
    game: &PayoffMatrix,
    epsilon: f64,
    greedy: &JointAction,
    provider: QProvider,
) -> Result<ConditionReport> {
    let table = joint_q_table(game, greedy, epsilon, provider)?;
    let shape = game.shape();
    let gi = shape.index(&greedy.0);
    let (qg_true, qg) = (game.values[gi], table[gi]);
    let entries: Vec<ConditionEntry> = (0..game.size())
        .filter(|&i| i != gi)
        .map(|i| {
            let (condition, holds) = if game.values[i] <= qg_true {
                (Condition::One, table[i] < qg)
            } else {
                (Condition::Two, table[i] > qg)
            };
            ConditionEntry { action: shape.unindex(i), condition, holds }
        })
        .collect();
    let all = |c: Condition| entries.iter().filter(|e| e.condition == c).all(|e| e.holds);
    Ok(ConditionReport {
        greedy: greedy.clone(),
        condition1_all: all(Condition::One),
        condition2_all: all(Condition::Two),
        entries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub stns: Vec<JointAction>,
    pub optimal_is_stn: bool,
    pub oscillations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSweep {
    pub rows: Vec<SweepRow>,
    /// Smallest ε with exactly one STN, refined by bisection.
    pub threshold: Option<f64>,
}

pub const BISECTION_TOL: f64 = 1e-3;

pub fn stn_count(game: &PayoffMatrix, epsilon: f64, provider: QProvider) -> Result<usize> {
    Ok(build_graph(game, epsilon, provider)?.stns().len())
}

pub fn epsilon_sweep(game: &PayoffMatrix, grid: &[f64], provider: QProvider) -> Result<EpsilonSweep> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 || grid[grid.len() - 1] >= 1.0 {
        return Err(GvrError::Parameter("epsilon grid must be strictly increasing inside (0, 1)".into()));
    }
    let shape = game.shape();
    let mut rows = Vec::with_capacity(grid.len());
    for &eps in grid {
        let g = build_graph(game, eps, provider)?;
        rows.push(SweepRow {
            epsilon: eps,
            stns: g.stns().into_iter().map(|i| shape.unindex(i)).collect(),
            optimal_is_stn: g.optimal_is_stn(),
            oscillations: g.oscillations().len(),
        });
    }
    let threshold = match rows.iter().position(|r| r.stns.len() == 1) {
        None => None,
        Some(0) => Some(grid[0]),
        Some(k) => {
            let (mut lo, mut hi) = (grid[k - 1], grid[k]);
            while hi - lo > BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if stn_count(game, mid, provider)? == 1 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi)
        }
    };
    Ok(EpsilonSweep { rows, threshold })
}

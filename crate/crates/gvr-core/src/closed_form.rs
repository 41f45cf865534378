//! Analytic joint Q values, ΔQ expressions and exploration/weight bounds.

use serde::{Deserialize, Serialize};

use crate::error::{GvrError, Result};
use crate::game::{action_probs, argmax_tol, JointAction, PayoffMatrix, Shape};
use crate::linalg::Lu;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mixer {
    /// Raw weights; the decomposition uses their absolute values.
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityTables {
    pub per_agent: Vec<Vec<f64>>,
    pub mixer: Option<Mixer>,
}

impl UtilityTables {
    pub fn n(&self) -> usize {
        self.per_agent.len()
    }

    pub fn m(&self) -> usize {
        self.per_agent.first().map_or(0, Vec::len)
    }

    pub fn weight(&self, a: usize) -> f64 {
        self.mixer.as_ref().map_or(1.0, |mx| mx.weights[a].abs())
    }

    pub fn joint_q(&self, u: &[usize]) -> f64 {
        let bias = self.mixer.as_ref().map_or(0.0, |mx| mx.bias);
        u.iter()
            .enumerate()
            .map(|(a, &k)| self.weight(a) * self.per_agent[a][k])
            .sum::<f64>()
            + bias
    }

    /// Joint Q over the whole row-major joint action space.
    pub fn joint_table(&self) -> Vec<f64> {
        let shape = Shape { n: self.n(), m: self.m() };
        let mut u = vec![0; shape.n];
        (0..shape.size())
            .map(|i| {
                shape.unindex_into(i, &mut u);
                self.joint_q(&u)
            })
            .collect()
    }

    /// Per-agent argmax; equals the lowest-index joint argmax for a monotonic mixer.
    pub fn greedy(&self) -> JointAction {
        JointAction(self.per_agent.iter().map(|v| argmax_tol(v, 0.0)).collect())
    }

    /// Greedy action with near-ties (relative `tol`) resolved toward the lowest index.
    pub fn greedy_tol(&self, tol: f64) -> JointAction {
        JointAction(self.per_agent.iter().map(|v| argmax_tol(v, tol)).collect())
    }
}

/// ε-greedy action distribution of every agent around `greedy`.
pub fn agent_probs(greedy: &[usize], m: usize, epsilon: f64) -> Vec<Vec<f64>> {
    let (pg, po) = action_probs(epsilon, m);
    greedy
        .iter()
        .map(|&g| (0..m).map(|k| if k == g { pg } else { po }).collect())
        .collect()
}

/// Stationary utilities of a linear decomposition trained on fixed targets under ε-greedy data.
///
/// Each utility equals the expectation of its target minus the other agents' utilities
/// over joint actions containing it. The constant-shift nullspace is pinned by U^a(0) = 0
/// for every agent but the first.
#[derive(Clone, Debug)]
pub struct FixedPointSystem {
    shape: Shape,
    probs: Vec<Vec<f64>>,
    lu: Lu,
}

impl FixedPointSystem {
    pub fn new(shape: Shape, greedy: &JointAction, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(GvrError::Parameter(format!("epsilon {epsilon} outside (0, 1]")));
        }
        if greedy.len() != shape.n || greedy.0.iter().any(|&g| g >= shape.m) {
            return Err(GvrError::Shape(format!("greedy {greedy} does not fit the game")));
        }
        let (n, m) = (shape.n, shape.m);
        let dim = n * m;
        let probs = agent_probs(&greedy.0, m, epsilon);
        let mut a = vec![0.0; dim * dim];
        for ag in 0..n {
            for k in 0..m {
                let row = ag * m + k;
                if ag > 0 && k == 0 {
                    a[row * dim + row] = 1.0;
                    continue;
                }
                a[row * dim + row] = 1.0;
                for (i, p) in probs.iter().enumerate() {
                    if i == ag {
                        continue;
                    }
                    for (l, &pl) in p.iter().enumerate() {
                        a[row * dim + i * m + l] = pl;
                    }
                }
            }
        }
        let lu = Lu::factor(a, dim, 1e-12)?;
        Ok(FixedPointSystem { shape, probs, lu })
    }

    /// Right-hand side E[T(k, u^{-a})] for every (agent, action).
    fn rhs(&self, targets: &[f64]) -> Vec<f64> {
        let (n, m) = (self.shape.n, self.shape.m);
        let mut b = vec![0.0; n * m];
        let mut u = vec![0; n];
        for (idx, &t) in targets.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            self.shape.unindex_into(idx, &mut u);
            let p: f64 = u.iter().enumerate().map(|(i, &k)| self.probs[i][k]).product();
            if p == 0.0 {
                continue;
            }
            let pt = p * t;
            for (a, &k) in u.iter().enumerate() {
                b[a * m + k] += pt / self.probs[a][k];
            }
        }
        for a in 1..n {
            b[a * m] = 0.0;
        }
        b
    }

    pub fn solve(&self, targets: &[f64]) -> UtilityTables {
        assert_eq!(targets.len(), self.shape.size());
        let x = self.lu.solve(&self.rhs(targets));
        UtilityTables {
            per_agent: x.chunks(self.shape.m).map(<[f64]>::to_vec).collect(),
            mixer: None,
        }
    }
}

pub fn fixed_point_utilities(
    game: &PayoffMatrix,
    greedy: &JointAction,
    epsilon: f64,
) -> Result<UtilityTables> {
    game.check_action(greedy)?;
    Ok(FixedPointSystem::new(game.shape(), greedy, epsilon)?.solve(&game.values))
}

fn check_closed_form_domain(game: &PayoffMatrix, greedy: &JointAction, epsilon: f64) -> Result<()> {
    if game.n != 2 {
        return Err(GvrError::Shape(format!(
            "the two-agent closed form needs n = 2, got n = {}",
            game.n
        )));
    }
    game.check_action(greedy)?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(GvrError::Parameter(format!("epsilon {epsilon} outside [0, 1]")));
    }
    Ok(())
}

/// Two-agent joint Q table in closed form, as `table[i][j]`.
pub fn joint_q_closed_form(
    game: &PayoffMatrix,
    greedy: &JointAction,
    epsilon: f64,
) -> Result<Vec<Vec<f64>>> {
    check_closed_form_domain(game, greedy, epsilon)?;
    let m = game.m;
    let mf = m as f64;
    let q = |i: usize, j: usize| game.values[i * m + j];
    let (gi, gj) = (greedy.0[0], greedy.0[1]);
    let row: Vec<f64> = (0..m).map(|i| (0..m).map(|k| q(i, k)).sum()).collect();
    let col: Vec<f64> = (0..m).map(|j| (0..m).map(|k| q(k, j)).sum()).collect();
    let total: f64 = row.iter().sum();
    let e = epsilon;
    let table = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    e / mf * (row[i] + col[j]) + (1.0 - e) * (q(gi, j) + q(i, gj))
                        - e * (1.0 - e) / mf * (row[gi] + col[gj])
                        - e * e / (mf * mf) * total
                        - (1.0 - e) * (1.0 - e) * q(gi, gj)
                })
                .collect()
        })
        .collect();
    Ok(table)
}

/// Two-agent joint Q of the greedy action itself.
pub fn greedy_joint_q(game: &PayoffMatrix, greedy: &JointAction, epsilon: f64) -> Result<f64> {
    check_closed_form_domain(game, greedy, epsilon)?;
    let m = game.m;
    let mf = m as f64;
    let q = |i: usize, j: usize| game.values[i * m + j];
    let (gi, gj) = (greedy.0[0], greedy.0[1]);
    let cross: f64 = (0..m).map(|k| q(gi, k) + q(k, gj)).sum();
    let total: f64 = game.values.iter().sum();
    let e = epsilon;
    Ok(e * e / mf * cross - e * e / (mf * mf) * total + (1.0 - e * e) * q(gi, gj))
}

pub fn coefficient_sum(epsilon: f64, m: usize) -> f64 {
    let (e, mf) = (epsilon, m as f64);
    2.0 * mf * (e / mf) + 2.0 * (1.0 - e) - mf * mf * (e * e / (mf * mf))
        - 2.0 * mf * (e * (1.0 - e) / mf)
        - (1.0 - e) * (1.0 - e)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItsParams {
    pub alpha: f64,
    pub e_q0: f64,
    pub e_q: f64,
}

impl ItsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(GvrError::Parameter(format!("alpha {} must be > 0", self.alpha)));
        }
        if !(self.e_q0 >= 0.0) {
            return Err(GvrError::Parameter(format!("e_Q0 {} must be >= 0", self.e_q0)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaBundle {
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta_s: f64,
}

impl EtaBundle {
    pub fn new(n: usize, m: usize, epsilon: f64, eta_s: f64) -> Self {
        let (pg, po) = action_probs(epsilon, m);
        let k = (n - 1) as i32;
        EtaBundle { n, m, epsilon, eta1: po.powi(k), eta2: pg.powi(k), eta_s }
    }

    /// Overlap variant for `l` agents sharing the greedy entry.
    pub fn eta1_prime(&self, l: usize) -> f64 {
        let (pg, po) = action_probs(self.epsilon, self.m);
        po.powi((self.n - l) as i32) * pg.powi(l as i32 - 1)
    }
}

fn check_open_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(GvrError::Parameter(format!("epsilon {epsilon} outside (0, 1)")));
    }
    Ok(())
}

/// Hardest-exploration ΔQ = Q(u_s) − Q(ú) under ITS with a single superior action.
pub fn delta_q_its(
    n: usize,
    m: usize,
    epsilon: f64,
    its: &ItsParams,
    q_true_greedy: f64,
    q_joint_greedy: f64,
) -> Result<f64> {
    check_open_epsilon(epsilon)?;
    let eta = EtaBundle::new(n, m, epsilon, 1.0);
    let nf = n as f64;
    Ok(nf * (eta.eta1 - eta.eta2) * (q_true_greedy - (1.0 - its.alpha) * q_joint_greedy)
        + nf * eta.eta1 * its.e_q * q_true_greedy)
}

/// ΔQ when `l` agents of the superior action agree with the greedy action.
pub fn delta_q_its_general(
    n: usize,
    m: usize,
    l: usize,
    epsilon: f64,
    its: &ItsParams,
    q_true_greedy: f64,
    q_joint_greedy: f64,
) -> Result<f64> {
    check_open_epsilon(epsilon)?;
    if l < 1 || l + 1 > n {
        return Err(GvrError::Parameter(format!("overlap l = {l} outside [1, {}]", n - 1)));
    }
    let eta = EtaBundle::new(n, m, epsilon, 1.0);
    let e1p = eta.eta1_prime(l);
    let k = (n - l) as f64;
    Ok(k * (e1p - eta.eta2) * (q_true_greedy - (1.0 - its.alpha) * q_joint_greedy)
        + k * e1p * its.e_q * q_true_greedy)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBound {
    pub epsilon0: f64,
    /// Threshold α/(α+e_Q0) that η₁/η₂ has to exceed.
    pub eta0: f64,
}

/// Smallest ε for which η₁/η₂ > α/(α+e_Q0), i.e. ITS alone removes every non-optimal STN.
pub fn epsilon_lower_bound(m: usize, n: usize, e_q0: f64, alpha: f64) -> Result<EpsilonBound> {
    if !(e_q0 > 0.0 && alpha > 0.0) {
        return Err(GvrError::Parameter(format!(
            "need e_Q0 > 0 and alpha > 0, got {e_q0} and {alpha}"
        )));
    }
    if n < 2 {
        return Err(GvrError::Parameter("need n >= 2".into()));
    }
    let mf = m as f64;
    let root = (1.0 + e_q0 / alpha).powf(1.0 / (n - 1) as f64);
    Ok(EpsilonBound { epsilon0: mf / (root + mf - 1.0), eta0: alpha / (alpha + e_q0) })
}

/// Superior-sample weight above which the hardest non-optimal STN disappears.
pub fn superior_weight_bound_w0(n: usize, m: usize, epsilon: f64, alpha: f64, e_q: f64) -> Result<f64> {
    if !(e_q > 0.0) {
        return Err(GvrError::Parameter(format!("e_Q {e_q} must be > 0")));
    }
    let eta = EtaBundle::new(n, m, epsilon, 1.0);
    Ok(alpha * (eta.eta2 - eta.eta1) / (e_q * eta.eta1))
}

#[allow(clippy::too_many_arguments)]
pub fn delta_q_weighted(
    n: usize,
    m: usize,
    epsilon: f64,
    alpha: f64,
    e_q: f64,
    w: f64,
    q_true_greedy: f64,
    q_joint_greedy: f64,
) -> Result<f64> {
    if !(w >= 1.0) {
        return Err(GvrError::Parameter(format!("weight {w} must be >= 1")));
    }
    let eta = EtaBundle::new(n, m, epsilon, 1.0);
    let (e1, e2, nf) = (eta.eta1, eta.eta2, n as f64);
    let den = 1.0 + nf * (w - 1.0) * e1;
    Ok(nf * ((1.0 - alpha) * (e2 - e1) - (w - 1.0) * e1) / den * q_joint_greedy
        + nf * (w * (1.0 + e_q) * e1 - e2) / den * q_true_greedy)
}

pub fn ser_weight_bound(n: usize, m: usize, epsilon: f64, alpha: f64, e_q0: f64, eta_s: f64) -> Result<f64> {
    if !(eta_s > 0.0 && eta_s <= 1.0) {
        return Err(GvrError::Parameter(format!("eta_s {eta_s} outside (0, 1]")));
    }
    if !(e_q0 > 0.0) {
        return Err(GvrError::Parameter(format!("e_Q0 {e_q0} must be > 0")));
    }
    let eta = EtaBundle::new(n, m, epsilon, eta_s);
    Ok(alpha / e_q0 * (eta.eta2 - eta.eta1) * eta_s - eta.eta1 * eta_s)
}

#[allow(clippy::too_many_arguments)]
pub fn delta_q_ser(
    n: usize,
    m: usize,
    epsilon: f64,
    alpha: f64,
    e_q: f64,
    eta_s: f64,
    w_ser: f64,
    q_true_greedy: f64,
    q_joint_greedy: f64,
) -> Result<f64> {
    if !(w_ser >= 0.0) {
        return Err(GvrError::Parameter(format!("w_ser {w_ser} must be >= 0")));
    }
    if !(eta_s > 0.0 && eta_s <= 1.0) {
        return Err(GvrError::Parameter(format!("eta_s {eta_s} outside (0, 1]")));
    }
    let eta = EtaBundle::new(n, m, epsilon, eta_s);
    let (e1, e2, nf) = (eta.eta1, eta.eta2, n as f64);
    let den = eta_s + nf * w_ser;
    Ok(nf * ((1.0 - alpha) * (e2 - e1) * eta_s - w_ser) / den * q_joint_greedy
        + nf * ((w_ser + e1 * eta_s) * (1.0 + e_q) - e2 * eta_s) / den * q_true_greedy)
}

/// Which greedy Q value anchors the inferior target Q(ú) − α|Q(ú)|.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItsAnchor {
    /// The joint Q of ú induced by the shaped targets themselves.
    SelfConsistent,
    /// The true value 𝒬(ú).
    TrueGreedy,
}

#[derive(Clone, Debug)]
pub struct ItsSolution {
    pub utilities: UtilityTables,
    pub q_greedy: f64,
    pub inferior_target: f64,
    pub superior: Vec<usize>,
    pub iterations: usize,
}

/// ITS target of one joint action.
pub fn its_target(q_true: f64, q_joint_greedy: f64, is_greedy: bool, is_superior: bool, alpha: f64) -> f64 {
    if is_greedy || is_superior {
        q_true
    } else {
        q_joint_greedy - alpha * q_joint_greedy.abs()
    }
}

/// Superior means beating 𝒬(ú) by the relative gap e_Q0 (scaled by |𝒬(ú)| so the sign is kept).
pub fn superior_set(game: &PayoffMatrix, greedy: &JointAction, e_q0: f64) -> Vec<usize> {
    let gi = game.shape().index(&greedy.0);
    let qg = game.values[gi];
    let thr = qg + e_q0 * qg.abs();
    (0..game.size()).filter(|&i| i != gi && game.values[i] > thr).collect()
}

pub const ITS_TOL: f64 = 1e-10;
pub const ITS_MAX_ITERS: usize = 10_000;

/// Joint Q of the stationary point under ITS targets.
///
/// Linearity splits the solution into the part driven by the fixed targets and the part
/// driven by the shared inferior target c, so only the scalar Q(ú) has to be iterated.
pub fn its_fixed_point(
    game: &PayoffMatrix,
    greedy: &JointAction,
    epsilon: f64,
    alpha: f64,
    e_q0: f64,
    anchor: ItsAnchor,
) -> Result<ItsSolution> {
    game.check_action(greedy)?;
    ItsParams { alpha, e_q0, e_q: 0.0 }.validate()?;
    let sys = FixedPointSystem::new(game.shape(), greedy, epsilon)?;
    its_fixed_point_with(&sys, game, greedy, alpha, e_q0, anchor)
}

pub(crate) fn its_fixed_point_with(
    sys: &FixedPointSystem,
    game: &PayoffMatrix,
    greedy: &JointAction,
    alpha: f64,
    e_q0: f64,
    anchor: ItsAnchor,
) -> Result<ItsSolution> {
    let gi = game.shape().index(&greedy.0);
    let superior = superior_set(game, greedy, e_q0);
    let mut fixed = vec![0.0; game.size()];
    let mut inferior = vec![1.0; game.size()];
    fixed[gi] = game.values[gi];
    inferior[gi] = 0.0;
    for &s in &superior {
        fixed[s] = game.values[s];
        inferior[s] = 0.0;
    }
    let uf = sys.solve(&fixed);
    let ui = sys.solve(&inferior);
    let a = uf.joint_q(&greedy.0);
    let b = ui.joint_q(&greedy.0);
    let qg_true = game.values[gi];
    let (c, iterations) = match anchor {
        ItsAnchor::TrueGreedy => (qg_true - alpha * qg_true.abs(), 0),
        ItsAnchor::SelfConsistent => {
            let mut x = qg_true;
            let mut it = 0;
            loop {
                let next = a + (x - alpha * x.abs()) * b;
                it += 1;
                let done = (next - x).abs() < ITS_TOL;
                x = next;
                if done {
                    break;
                }
                if it >= ITS_MAX_ITERS {
                    return Err(GvrError::Degenerate(format!(
                        "ITS greedy value did not settle in {ITS_MAX_ITERS} iterations"
                    )));
                }
            }
            (x - alpha * x.abs(), it)
        }
    };
    let per_agent = uf
        .per_agent
        .iter()
        .zip(&ui.per_agent)
        .map(|(f, i)| f.iter().zip(i).map(|(x, y)| x + c * y).collect())
        .collect();
    let utilities = UtilityTables { per_agent, mixer: None };
    let q_greedy = utilities.joint_q(&greedy.0);
    Ok(ItsSolution { utilities, q_greedy, inferior_target: c, superior, iterations })
}

/// Hardest-case game for ΔQ checks: ú at (m−1,…), a single superior action at (0,…).
pub fn hardest_case_game(n: usize, m: usize, q_true_greedy: f64, e_q: f64) -> Result<PayoffMatrix> {
    let shape = Shape { n, m };
    let mut values = vec![q_true_greedy - 1.0 - q_true_greedy.abs(); shape.size()];
    values[0] = q_true_greedy * (1.0 + e_q);
    values[shape.size() - 1] = q_true_greedy;
    PayoffMatrix::new(n, m, values)
}

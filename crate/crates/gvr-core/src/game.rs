//! Payoff tensors over joint actions and ε-greedy sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GvrError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn uniform(n: usize, a: usize) -> Self {
        JointAction(vec![a; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of agents whose entries agree with `other`.
    pub fn overlap(&self, other: &JointAction) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a == b).count()
    }
}

impl std::fmt::Display for JointAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Row-major index helpers; agent 0 varies slowest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub m: usize,
}

impl Shape {
    pub fn size(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    pub fn index(&self, u: &[usize]) -> usize {
        u.iter().fold(0, |acc, &a| acc * self.m + a)
    }

    pub fn unindex(&self, mut idx: usize) -> JointAction {
        let mut out = vec![0; self.n];
        for slot in out.iter_mut().rev() {
            *slot = idx % self.m;
            idx /= self.m;
        }
        JointAction(out)
    }

    /// Writes the decoded joint action into `out` without allocating.
    pub fn unindex_into(&self, mut idx: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = idx % self.m;
            idx /= self.m;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    pub n: usize,
    pub m: usize,
    pub values: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        let g = PayoffMatrix { n, m, values };
        g.validate()?;
        Ok(g)
    }

    /// Builds a game without the m ≥ 2 restriction (degenerate single-action games).
    pub fn new_unchecked(n: usize, m: usize, values: Vec<f64>) -> Self {
        PayoffMatrix { n, m, values }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.m < 2 {
            return Err(GvrError::Shape(format!(
                "need n >= 2 and m >= 2, got n={} m={}",
                self.n, self.m
            )));
        }
        let expected = self
            .m
            .checked_pow(self.n as u32)
            .ok_or_else(|| GvrError::Shape("m^n overflows".into()))?;
        if self.values.len() != expected {
            return Err(GvrError::Shape(format!(
                "expected {} values for {}^{}, got {}",
                expected,
                self.m,
                self.n,
                self.values.len()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(GvrError::Shape(format!("value at index {i} is not finite")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: PayoffMatrix = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("payoff matrix serializes")
    }

    pub fn shape(&self) -> Shape {
        Shape { n: self.n, m: self.m }
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, u: &JointAction) -> f64 {
        self.values[self.shape().index(&u.0)]
    }

    pub fn set(&mut self, u: &JointAction, v: f64) {
        let i = self.shape().index(&u.0);
        self.values[i] = v;
    }

    pub fn check_action(&self, u: &JointAction) -> Result<()> {
        if u.len() != self.n || u.0.iter().any(|&a| a >= self.m) {
            return Err(GvrError::Shape(format!(
                "joint action {u} does not fit a {}-agent, {}-action game",
                self.n, self.m
            )));
        }
        Ok(())
    }

    /// Optimal joint action, ties broken toward the lowest index.
    pub fn optimal_action(&self) -> JointAction {
        self.shape().unindex(argmax(&self.values))
    }

    pub fn max_value(&self) -> f64 {
        self.values[argmax(&self.values)]
    }
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// First index whose value is within `rel_tol·(1+|max|)` of the maximum.
pub fn argmax_tol(values: &[f64], rel_tol: f64) -> usize {
    let best = values[argmax(values)];
    let cut = best - rel_tol * (1.0 + best.abs());
    values.iter().position(|&v| v >= cut).unwrap_or(0)
}

/// The 3×3 game used to check the joint Q expression for two agents.
pub fn make_paper_matrix_3x3() -> PayoffMatrix {
    PayoffMatrix::new(
        2,
        3,
        vec![8.0, -12.0, -12.0, -12.0, 0.0, 0.0, -12.0, 0.0, 6.0],
    )
    .expect("static matrix is valid")
}

/// Random game with the optimum at (0,…,0) and a greedy anchor at (m−1,…,m−1).
///
/// Other entries are i.i.d. uniform on [low, high] from a ChaCha8 stream.
pub fn make_random_its_matrix(
    n: usize,
    m: usize,
    optimal_value: f64,
    greedy_value: f64,
    low: f64,
    high: f64,
    seed: u64,
) -> Result<(PayoffMatrix, JointAction, JointAction)> {
    if n < 2 || m < 2 {
        return Err(GvrError::Shape(format!("need n >= 2 and m >= 2, got n={n} m={m}")));
    }
    if !(optimal_value > greedy_value) {
        return Err(GvrError::Parameter(format!(
            "optimal value {optimal_value} must exceed greedy value {greedy_value}"
        )));
    }
    if !(low < high && high <= greedy_value) {
        return Err(GvrError::Parameter(format!(
            "need low < high <= greedy value, got [{low}, {high}] and {greedy_value}"
        )));
    }
    let shape = Shape { n, m };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..shape.size()).map(|_| rng.gen_range(low..=high)).collect();
    let mut game = PayoffMatrix::new(n, m, values)?;
    let optimal = JointAction::uniform(n, 0);
    let greedy = JointAction::uniform(n, m - 1);
    game.set(&optimal, optimal_value);
    game.set(&greedy, greedy_value);
    Ok((game, optimal, greedy))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationPolicy {
    pub epsilon: f64,
    pub rng_seed: u64,
}

/// Per-agent ε-greedy probabilities as (greedy, each other action).
pub fn action_probs(epsilon: f64, m: usize) -> (f64, f64) {
    let other = epsilon / m as f64;
    (1.0 - epsilon + other, other)
}

/// Draws one joint action: each agent keeps its greedy entry w.p. 1−ε+ε/m.
pub fn sample_joint_action_into<R: Rng + ?Sized>(
    rng: &mut R,
    epsilon: f64,
    m: usize,
    greedy: &[usize],
    out: &mut [usize],
) {
    for (slot, &g) in out.iter_mut().zip(greedy) {
        *slot = if rng.gen::<f64>() < epsilon { rng.gen_range(0..m) } else { g };
    }
}

pub fn sample_joint_action<R: Rng + ?Sized>(
    rng: &mut R,
    policy: &ExplorationPolicy,
    m: usize,
    greedy: &JointAction,
) -> JointAction {
    let mut out = vec![0; greedy.len()];
    sample_joint_action_into(rng, policy.epsilon, m, &greedy.0, &mut out);
    JointAction(out)
}

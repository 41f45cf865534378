//! Training loop shared by plain VDN, ITS-only and full GVR.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::buffer::{trajectory_priority, ReplayBuffer, SuperiorBuffer, Trajectory};
use super::critic::{CriticEnsemble, ThresholdKind};
use super::value::{Decomposition, Sample, ValueLearner};
use crate::closed_form::{its_target, EtaBundle, UtilityTables};
use crate::error::{GvrError, Result};
use crate::game::{sample_joint_action_into, JointAction, PayoffMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Plain regression on rewards.
    Vdn,
    /// Inferior target shaping only.
    Its,
    /// ITS plus superior experience replay.
    Gvr,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Vdn => "VDN",
            Variant::Its => "ITS",
            Variant::Gvr => "GVR",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonSchedule {
    Constant { epsilon: f64 },
    /// Linear from `start` to `end` over the first `iterations`, then flat.
    Linear { start: f64, end: f64, iterations: usize },
}

impl EpsilonSchedule {
    pub fn at(&self, it: usize) -> f64 {
        match *self {
            EpsilonSchedule::Constant { epsilon } => epsilon,
            EpsilonSchedule::Linear { start, end, iterations } => {
                if iterations == 0 || it >= iterations {
                    end
                } else {
                    start + (end - start) * it as f64 / iterations as f64
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// lr·min(1, τ/k) where k counts iterations since the greedy action last changed.
    Harmonic { tau: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSource {
    /// Train on the episodes collected in the same iteration.
    OnPolicy,
    Replay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GvrConfig {
    pub variant: Variant,
    pub decomposition: Decomposition,
    pub alpha: f64,
    pub epsilon: EpsilonSchedule,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    pub batch_source: BatchSource,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub superior_capacity: usize,
    pub superior_batch: usize,
    pub n_c: usize,
    pub critic_lr: f64,
    pub critic_init_spread: f64,
    pub threshold: ThresholdKind,
    pub eta_s: f64,
    /// Housed for multi-step returns; one-step games never discount.
    pub gamma: f64,
    pub test_interval: usize,
    pub test_episodes: usize,
    /// Floor on the relative gap used in the superior weight.
    pub e_q0_min: f64,
    pub w_ser_max: f64,
    /// Use η₁′(l) for the superior weight when the replayed action overlaps the greedy one.
    pub overlap_eta: bool,
    pub fixed_greedy: Option<JointAction>,
    pub init_scale: f64,
    pub init_greedy: Option<JointAction>,
    pub curvature_beta: f64,
    /// Std of Gaussian noise added to every observed reward.
    pub reward_noise: f64,
}

impl Default for GvrConfig {
    fn default() -> Self {
        GvrConfig {
            variant: Variant::Gvr,
            decomposition: Decomposition::Lvd,
            alpha: 0.2,
            epsilon: EpsilonSchedule::Constant { epsilon: 0.2 },
            learning_rate: 0.05,
            lr_schedule: LrSchedule::Constant,
            iterations: 1000,
            episodes_per_iteration: 100,
            batch_source: BatchSource::Replay,
            replay_capacity: 1000,
            batch_size: 32,
            superior_capacity: 3,
            superior_batch: 1,
            n_c: 5,
            critic_lr: 0.05,
            critic_init_spread: 1.0,
            threshold: ThresholdKind::ThreeSigma,
            eta_s: 1.0,
            gamma: 0.99,
            test_interval: 10,
            test_episodes: 10,
            e_q0_min: 0.05,
            w_ser_max: 20.0,
            overlap_eta: false,
            fixed_greedy: None,
            init_scale: 0.1,
            init_greedy: None,
            curvature_beta: 0.9,
            reward_noise: 0.0,
        }
    }
}

impl GvrConfig {
    /// Missing fields take their defaults; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| GvrError::Schema { path: e.path().to_string(), msg: e.inner().to_string() })
    }

    pub fn validate(&self, game: &PayoffMatrix) -> Result<()> {
        let bad = |msg: String| Err(GvrError::Parameter(msg));
        if !(self.alpha > 0.0) {
            return bad(format!("alpha {} must be > 0", self.alpha));
        }
        if self.replay_capacity < 1 || self.superior_capacity < 1 || self.n_c < 1 || self.batch_size < 1 {
            return bad("capacities, batch size and critic count must be >= 1".into());
        }
        if self.superior_batch != 1 {
            return bad(format!("superior batch must be 1, got {}", self.superior_batch));
        }
        if self.episodes_per_iteration < 1 || self.test_interval < 1 || self.test_episodes < 1 {
            return bad("episode counts and test interval must be >= 1".into());
        }
        if !(self.eta_s > 0.0 && self.eta_s <= 1.0) {
            return bad(format!("eta_s {} outside (0, 1]", self.eta_s));
        }
        if !(self.learning_rate > 0.0) || !(self.critic_lr > 0.0) {
            return bad("learning rates must be > 0".into());
        }
        for it in [0, self.iterations] {
            let e = self.epsilon.at(it);
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("epsilon {e} outside [0, 1]"));
            }
        }
        for a in [&self.fixed_greedy, &self.init_greedy].into_iter().flatten() {
            game.check_action(a)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub greedy: usize,
    pub test_return: Option<f64>,
    pub q_checksum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub records: Vec<IterationRecord>,
    pub final_greedy: JointAction,
    pub utilities: UtilityTables,
    pub reached_optimal: bool,
    /// Greedy action changed during the final 10% of iterations.
    pub non_converged: bool,
    pub greedy_switches: usize,
    pub final_test_return: f64,
}

impl TrainingRecord {
    /// Optimal and stable at the end of training.
    pub fn converged_to_optimal(&self) -> bool {
        self.reached_optimal && !self.non_converged
    }
}

/// Superior-sample weight for the current exploration rate and critic state.
pub fn ser_weight(cfg: &GvrConfig, n: usize, m: usize, epsilon: f64, e_q0: f64, overlap: usize) -> f64 {
    let eta = EtaBundle::new(n, m, epsilon, cfg.eta_s);
    let e1 = if cfg.overlap_eta && overlap >= 1 && overlap < n { eta.eta1_prime(overlap) } else { eta.eta1 };
    let e = e_q0.max(cfg.e_q0_min);
    let w = cfg.alpha / e * (eta.eta2 - e1) * cfg.eta_s - e1 * cfg.eta_s;
    w.clamp(0.0, cfg.w_ser_max)
}

/// Runs one training; `stream` selects an independent ChaCha stream under `seed`.
pub fn gvr_train(game: &PayoffMatrix, cfg: &GvrConfig, seed: u64, stream: u64) -> Result<TrainingRecord> {
    cfg.validate(game)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let (n, m) = (game.n, game.m);
    let shape = game.shape();
    let optimal = game.optimal_action();
    let noise = Normal::new(0.0, cfg.reward_noise.max(0.0)).map_err(|e| GvrError::Parameter(e.to_string()))?;
    let reward = |rng: &mut ChaCha8Rng, u: &[usize]| {
        let r = game.values[shape.index(u)];
        if cfg.reward_noise > 0.0 {
            r + noise.sample(rng)
        } else {
            r
        }
    };

    let mut learner = ValueLearner::new(&mut rng, n, m, cfg.decomposition, cfg.init_scale, cfg.curvature_beta);
    if let Some(g) = &cfg.init_greedy {
        learner.bias_toward(&g.0, 0.5);
    }
    let mut critics = CriticEnsemble::random(&mut rng, cfg.n_c, cfg.critic_init_spread);
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut superior = SuperiorBuffer::new(cfg.superior_capacity);
    let mut on_policy: Vec<Trajectory> = Vec::with_capacity(cfg.episodes_per_iteration);
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut greedy = vec![0; n];
    let mut prev_greedy: Option<usize> = None;
    let mut since_change = 0usize;
    let mut switches = 0;
    let mut last_switch = 0;
    let mut next_id = 0u64;
    let mut act = vec![0; n];

    for it in 0..cfg.iterations {
        match &cfg.fixed_greedy {
            Some(g) => greedy.copy_from_slice(&g.0),
            None => learner.greedy_into(&mut greedy),
        }
        let gi = shape.index(&greedy);
        if prev_greedy != Some(gi) {
            if prev_greedy.is_some() {
                switches += 1;
                last_switch = it;
            }
            prev_greedy = Some(gi);
            since_change = 0;
        }
        since_change += 1;
        let epsilon = cfg.epsilon.at(it);
        let mut test_return = None;

        if it % cfg.test_interval == 0 {
            let steps: Vec<(f64, bool)> = (0..cfg.test_episodes).map(|_| (reward(&mut rng, &greedy), true)).collect();
            let mean = steps.iter().map(|s| s.0).sum::<f64>() / steps.len() as f64;
            critics.update(&mut rng, &steps, cfg.critic_lr);
            test_return = Some(mean);
        } else {
            on_policy.clear();
            for _ in 0..cfg.episodes_per_iteration {
                sample_joint_action_into(&mut rng, epsilon, m, &greedy, &mut act);
                let t = Trajectory { id: next_id, joint_action: act.clone(), reward: reward(&mut rng, &act), state_id: 0, priority: 0.0 };
                next_id += 1;
                match cfg.batch_source {
                    BatchSource::OnPolicy => on_policy.push(t),
                    BatchSource::Replay => replay.push(t),
                }
            }
            let batch: Vec<&Trajectory> = match cfg.batch_source {
                BatchSource::OnPolicy => on_policy.iter().collect(),
                BatchSource::Replay => replay.sample(&mut rng, cfg.batch_size),
            };
            let qg = learner.joint_q(&greedy);
            let thr = critics.threshold(cfg.threshold, qg);
            let shaped = cfg.variant != Variant::Vdn;
            let classify = |t: &Trajectory| t.joint_action != greedy && t.reward > thr;
            let bw = 1.0 / batch.len() as f64;
            let mut samples: Vec<Sample> = batch
                .iter()
                .map(|t| {
                    let is_g = t.joint_action == greedy;
                    let target = if shaped { its_target(t.reward, qg, is_g, classify(t), cfg.alpha) } else { t.reward };
                    Sample { action: &t.joint_action, target, weight: bw }
                })
                .collect();
            let top = if cfg.variant == Variant::Gvr { superior.pop_top() } else { None };
            if let Some(t) = &top {
                if classify(t) {
                    let anchor = if cfg.threshold == ThresholdKind::None { qg } else { critics.mean() };
                    let e_q0 = if anchor.abs() > 1e-9 { (thr - anchor) / anchor.abs() } else { 0.0 };
                    let l = JointAction(t.joint_action.clone()).overlap(&JointAction(greedy.clone()));
                    let w = ser_weight(cfg, n, m, epsilon, e_q0, l);
                    if w > 0.0 {
                        samples.push(Sample { action: &t.joint_action, target: t.reward, weight: w });
                    }
                }
            }
            let lr = match cfg.lr_schedule {
                LrSchedule::Constant => cfg.learning_rate,
                LrSchedule::Harmonic { tau } => cfg.learning_rate * (tau / since_change as f64).min(1.0),
            };
            learner.update(&samples, lr);
            if cfg.variant == Variant::Gvr {
                let mut keep: Vec<Trajectory> = batch
                    .iter()
                    .filter(|t| classify(t))
                    .map(|t| Trajectory { priority: trajectory_priority(&[t.reward], thr), ..(*t).clone() })
                    .collect();
                if let Some(t) = top {
                    if classify(&t) {
                        keep.push(Trajectory { priority: trajectory_priority(&[t.reward], thr), ..t });
                    }
                }
                for t in keep {
                    superior.insert(t);
                }
            }
        }
        records.push(IterationRecord { iteration: it, greedy: gi, test_return, q_checksum: learner.checksum() });
    }

    let final_greedy = match &cfg.fixed_greedy {
        Some(g) => g.clone(),
        None => JointAction(learner.greedy()),
    };
    let tail_start = cfg.iterations - cfg.iterations / 10;
    let final_test_return = game.get(&final_greedy);
    Ok(TrainingRecord {
        records,
        reached_optimal: final_greedy == optimal,
        non_converged: switches > 0 && last_switch >= tail_start.max(1),
        greedy_switches: switches,
        final_greedy,
        utilities: learner.utilities(),
        final_test_return,
    })
}

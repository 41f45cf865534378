use rand::Rng;
use serde::{Deserialize, Serialize};

/// How a non-greedy return is judged superior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdKind {
    ThreeSigma,
    KSigma { k: f64 },
    MeanPlusC { c: f64 },
    ScaledMean { c: f64 },
    /// Compare against the learned greedy joint Q instead of the critics.
    None,
}

pub fn threshold_value(kind: ThresholdKind, vbar: f64, sigma: f64, q_joint_greedy: f64) -> f64 {
    match kind {
        ThresholdKind::ThreeSigma => vbar + 3.0 * sigma,
        ThresholdKind::KSigma { k } => vbar + k * sigma,
        ThresholdKind::MeanPlusC { c } => vbar + c,
        ThresholdKind::ScaledMean { c } => (1.0 + c) * vbar,
        ThresholdKind::None => q_joint_greedy,
    }
}

/// Superior/inferior split for a non-greedy return; equality counts as inferior.
pub fn classify_action(ret: f64, vbar: f64, sigma: f64, kind: ThresholdKind, q_joint_greedy: f64) -> bool {
    ret > threshold_value(kind, vbar, sigma, q_joint_greedy)
}

/// Single-state critic ensemble; diversity comes from bootstrap resampling per critic.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticEnsemble {
    pub values: Vec<f64>,
}

impl CriticEnsemble {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty());
        CriticEnsemble { values }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_c: usize, spread: f64) -> Self {
        let values = (0..n_c)
            .map(|_| if spread > 0.0 { rng.gen_range(-spread..spread) } else { 0.0 })
            .collect();
        CriticEnsemble::new(values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let mu = self.mean();
        let var = self.values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / self.values.len() as f64;
        var.sqrt()
    }

    /// Relative gap 3σ/V̄ (defined for V̄ > 0).
    pub fn e_q0(&self) -> Option<f64> {
        let mu = self.mean();
        (mu > 0.0).then(|| 3.0 * self.std() / mu)
    }

    pub fn threshold(&self, kind: ThresholdKind, q_joint_greedy: f64) -> f64 {
        threshold_value(kind, self.mean(), self.std(), q_joint_greedy)
    }

    /// Strictly above the threshold counts as superior.
    pub fn is_superior(&self, ret: f64, kind: ThresholdKind, q_joint_greedy: f64) -> bool {
        ret > self.threshold(kind, q_joint_greedy)
    }

    /// One squared-error gradient step per critic on its own bootstrap resample.
    ///
    /// `steps` pairs each return with whether the step was greedy; non-greedy steps carry the
    /// critic's own value as target, so they are left out.
    pub fn update<R: Rng + ?Sized>(&mut self, rng: &mut R, steps: &[(f64, bool)], lr: f64) {
        let greedy: Vec<f64> = steps.iter().filter(|s| s.1).map(|s| s.0).collect();
        if greedy.is_empty() {
            return;
        }
        for v in &mut self.values {
            let mut sum = 0.0;
            for _ in 0..greedy.len() {
                sum += greedy[rng.gen_range(0..greedy.len())] - *v;
            }
            *v += lr * sum / greedy.len() as f64;
        }
    }
}

//! Tabular linear (LVD) and monotonic (MVD) decompositions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::closed_form::{Mixer, UtilityTables};
use crate::game::argmax;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decomposition {
    Lvd,
    Mvd,
}

#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub action: &'a [usize],
    pub target: f64,
    pub weight: f64,
}

/// Utility tables trained by weighted least squares.
///
/// Each step divides a parameter's gradient by a running estimate of its own curvature
/// (diagonal Gauss-Newton), so rarely visited actions move as fast as frequent ones
/// and the step size is insensitive to the scale of sample weights.
#[derive(Clone, Debug)]
pub struct ValueLearner {
    n: usize,
    m: usize,
    decomposition: Decomposition,
    u: Vec<f64>,
    w: Vec<f64>,
    bias: f64,
    hu: Vec<f64>,
    hw: Vec<f64>,
    hb: f64,
    beta: f64,
    steps: i32,
}

const MIXER_CURVATURE_FLOOR: f64 = 1e-2;

impl ValueLearner {
    pub fn new<R: Rng + ?Sized>(
        rng: &mut R,
        n: usize,
        m: usize,
        decomposition: Decomposition,
        init_scale: f64,
        curvature_beta: f64,
    ) -> Self {
        let u = (0..n * m)
            .map(|_| if init_scale > 0.0 { rng.gen_range(-init_scale..init_scale) } else { 0.0 })
            .collect();
        ValueLearner {
            n,
            m,
            decomposition,
            u,
            w: vec![1.0; n],
            bias: 0.0,
            hu: vec![0.0; n * m],
            hw: vec![0.0; n],
            hb: 0.0,
            beta: curvature_beta,
            steps: 0,
        }
    }

    /// Raises the utilities of `action` so it starts as the greedy action.
    pub fn bias_toward(&mut self, action: &[usize], amount: f64) {
        for (a, &k) in action.iter().enumerate() {
            self.u[a * self.m + k] += amount;
        }
    }

    pub fn decomposition(&self) -> Decomposition {
        self.decomposition
    }

    fn mvd(&self) -> bool {
        self.decomposition == Decomposition::Mvd
    }

    pub fn joint_q(&self, action: &[usize]) -> f64 {
        let mut q = if self.mvd() { self.bias } else { 0.0 };
        for (a, &k) in action.iter().enumerate() {
            let wa = if self.mvd() { self.w[a].abs() } else { 1.0 };
            q += wa * self.u[a * self.m + k];
        }
        q
    }

    pub fn greedy_into(&self, out: &mut [usize]) {
        for (a, slot) in out.iter_mut().enumerate() {
            *slot = argmax(&self.u[a * self.m..(a + 1) * self.m]);
        }
    }

    pub fn greedy(&self) -> Vec<usize> {
        let mut g = vec![0; self.n];
        self.greedy_into(&mut g);
        g
    }

    pub fn utilities(&self) -> UtilityTables {
        UtilityTables {
            per_agent: self.u.chunks(self.m).map(<[f64]>::to_vec).collect(),
            mixer: self.mvd().then(|| Mixer { weights: self.w.clone(), bias: self.bias }),
        }
    }

    pub fn checksum(&self) -> f64 {
        self.u.iter().sum::<f64>() + if self.mvd() { self.w.iter().map(|w| w.abs()).sum::<f64>() + self.bias } else { 0.0 }
    }

    pub fn update(&mut self, samples: &[Sample<'_>], lr: f64) {
        if samples.is_empty() {
            return;
        }
        let (n, m, mvd) = (self.n, self.m, self.mvd());
        let mut gu = vec![0.0; n * m];
        let mut hu = vec![0.0; n * m];
        let mut gw = vec![0.0; n];
        let mut hw = vec![0.0; n];
        let (mut gb, mut hb) = (0.0, 0.0);
        for s in samples {
            let res = s.target - self.joint_q(s.action);
            let wr = s.weight * res;
            for (a, &k) in s.action.iter().enumerate() {
                let i = a * m + k;
                let wa = if mvd { self.w[a].abs() } else { 1.0 };
                gu[i] += wr * wa;
                hu[i] += s.weight * wa * wa;
                if mvd {
                    gw[a] += wr * self.w[a].signum() * self.u[i];
                    hw[a] += s.weight * self.u[i] * self.u[i];
                }
            }
            gb += wr;
            hb += s.weight;
        }
        self.steps = self.steps.saturating_add(1);
        let (beta, t) = (self.beta, self.steps);
        let corr = 1.0 - beta.powi(t);
        let step = |g: f64, h: f64, ema: &mut f64, floor: f64| -> f64 {
            *ema = beta * *ema + (1.0 - beta) * h;
            if h == 0.0 {
                return 0.0;
            }
            lr * g / (*ema / corr).max(h).max(floor)
        };
        for i in 0..n * m {
            self.u[i] += step(gu[i], hu[i], &mut self.hu[i], 1e-12);
        }
        if mvd {
            for a in 0..n {
                self.w[a] += step(gw[a], hw[a], &mut self.hw[a], MIXER_CURVATURE_FLOOR);
            }
            self.bias += step(gb, hb, &mut self.hb, 1e-12);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fits_additive_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dec in [Decomposition::Lvd, Decomposition::Mvd] {
            let mut l = ValueLearner::new(&mut rng, 2, 2, dec, 0.1, 0.9);
            let acts = [[0, 0], [0, 1], [1, 0], [1, 1]];
            let tgt = [3.0, 1.0, 2.0, 0.0];
            for _ in 0..3000 {
                let s: Vec<Sample> = acts
                    .iter()
                    .zip(tgt)
                    .map(|(a, t)| Sample { action: a, target: t, weight: 0.25 })
                    .collect();
                l.update(&s, 0.1);
            }
            for (a, t) in acts.iter().zip(tgt) {
                assert!((l.joint_q(a) - t).abs() < 1e-6, "{dec:?} {a:?}");
            }
            assert_eq!(l.greedy(), vec![0, 0]);
        }
    }

    #[test]
    fn mixer_weights_enter_as_absolute_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut l = ValueLearner::new(&mut rng, 2, 2, Decomposition::Mvd, 0.0, 0.9);
        l.w = vec![-2.0, 0.5];
        l.u = vec![1.0, 0.0, 0.0, 4.0];
        l.bias = 1.0;
        assert_eq!(l.joint_q(&[0, 1]), 2.0 + 2.0 + 1.0);
        let t = l.utilities();
        assert_eq!(t.joint_q(&[0, 1]), 5.0);
    }
}

//! How often independent trainings end at each greedy node.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::train::{gvr_train, EpsilonSchedule, GvrConfig};
use crate::error::Result;
use crate::game::PayoffMatrix;
use crate::par::{try_map_range, Exec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyRow {
    pub epsilon: f64,
    pub matrix: usize,
    pub trials: usize,
    /// Trials ending stable at the optimal node.
    pub optimal: usize,
    /// Trials ending stable at any other node.
    pub non_optimal: usize,
    /// Trials whose greedy action still moved in the last 10% of iterations.
    pub flapping: usize,
    /// Final greedy node index → trial count, flapping trials excluded.
    pub endpoints: BTreeMap<usize, usize>,
}

impl OccupancyRow {
    pub fn ratio_optimal(&self) -> f64 {
        self.optimal as f64 / self.trials as f64
    }

    pub fn ratio_non_optimal(&self) -> f64 {
        self.non_optimal as f64 / self.trials as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyTable {
    pub rows: Vec<OccupancyRow>,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

impl OccupancyTable {
    pub fn epsilons(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.epsilon) {
                out.push(r.epsilon);
            }
        }
        out
    }

    /// Median over matrices of the optimal-node ratio at one ε.
    pub fn median_optimal(&self, epsilon: f64) -> f64 {
        let mut v: Vec<f64> = self.rows.iter().filter(|r| r.epsilon == epsilon).map(OccupancyRow::ratio_optimal).collect();
        median(&mut v)
    }

    pub fn median_non_optimal(&self, epsilon: f64) -> f64 {
        let mut v: Vec<f64> =
            self.rows.iter().filter(|r| r.epsilon == epsilon).map(OccupancyRow::ratio_non_optimal).collect();
        median(&mut v)
    }
}

/// Runs `trials` trainings per (matrix, ε); each trial gets its own ChaCha stream under `seed`.
pub fn stn_occupancy_experiment(
    games: &[PayoffMatrix],
    epsilon_grid: &[f64],
    trials: usize,
    base: &GvrConfig,
    seed: u64,
    exec: Exec,
) -> Result<OccupancyTable> {
    let cells = games.len() * epsilon_grid.len();
    let per_trial = try_map_range(exec, cells * trials, |flat| {
        let cell = flat / trials;
        let (g, e) = (cell / epsilon_grid.len(), cell % epsilon_grid.len());
        let cfg = GvrConfig { epsilon: EpsilonSchedule::Constant { epsilon: epsilon_grid[e] }, ..base.clone() };
        let rec = gvr_train(&games[g], &cfg, seed, flat as u64)?;
        let idx = games[g].shape().index(&rec.final_greedy.0);
        Ok::<_, crate::GvrError>((rec.converged_to_optimal(), rec.non_converged, idx))
    })?;
    let mut rows = Vec::with_capacity(cells);
    for g in 0..games.len() {
        for (e, &eps) in epsilon_grid.iter().enumerate() {
            let cell = g * epsilon_grid.len() + e;
            let mut row = OccupancyRow {
                epsilon: eps,
                matrix: g,
                trials,
                optimal: 0,
                non_optimal: 0,
                flapping: 0,
                endpoints: BTreeMap::new(),
            };
            for &(opt, flap, idx) in &per_trial[cell * trials..(cell + 1) * trials] {
                if flap {
                    row.flapping += 1;
                    continue;
                }
                *row.endpoints.entry(idx).or_default() += 1;
                if opt {
                    row.optimal += 1;
                } else {
                    row.non_optimal += 1;
                }
            }
            rows.push(row);
        }
    }
    Ok(OccupancyTable { rows })
}

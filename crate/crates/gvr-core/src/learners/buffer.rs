use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One-step episode: the return equals the reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: u64,
    pub joint_action: Vec<usize>,
    pub reward: f64,
    pub state_id: usize,
    pub priority: f64,
}

/// Summed excess of every superior step's return over the threshold; zero without superior steps.
pub fn trajectory_priority(step_returns: &[f64], threshold: f64) -> f64 {
    step_returns.iter().filter(|&&r| r > threshold).map(|r| r - threshold).sum()
}

/// FIFO ring buffer with uniform sampling without replacement.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Trajectory>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        ReplayBuffer { capacity, items: Vec::with_capacity(capacity), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Trajectory) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Vec<&Trajectory> {
        let k = batch.min(self.items.len());
        sample(rng, self.items.len(), k).into_iter().map(|i| &self.items[i]).collect()
    }
}

/// Small priority store: top-priority removal, minimum-priority eviction.
#[derive(Clone, Debug, Default)]
pub struct SuperiorBuffer {
    capacity: usize,
    /// Kept sorted by descending priority; ties keep insertion order.
    entries: Vec<Trajectory>,
}

impl SuperiorBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        SuperiorBuffer { capacity, entries: Vec::with_capacity(capacity + 1) }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn priorities(&self) -> Vec<f64> {
        self.entries.iter().map(|t| t.priority).collect()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.entries.iter().any(|t| t.id == id)
    }

    /// Inserts (or re-prioritizes) a trajectory; returns the evicted one, if any.
    pub fn insert(&mut self, t: Trajectory) -> Option<Trajectory> {
        self.entries.retain(|e| e.id != t.id);
        let pos = self.entries.partition_point(|e| e.priority >= t.priority);
        self.entries.insert(pos, t);
        if self.entries.len() > self.capacity {
            self.entries.pop()
        } else {
            None
        }
    }

    pub fn pop_top(&mut self) -> Option<Trajectory> {
        if self.entries.is_empty() {
            None
        } else {
            Some(self.entries.remove(0))
        }
    }
}

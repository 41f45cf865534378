//! Stochastic training of tabular decompositions: plain VDN, ITS, and full GVR.

pub mod buffer;
pub mod critic;
pub mod occupancy;
pub mod train;
pub mod value;

pub use buffer::{trajectory_priority, ReplayBuffer, SuperiorBuffer, Trajectory};
pub use critic::{classify_action, threshold_value, CriticEnsemble, ThresholdKind};
pub use occupancy::{stn_occupancy_experiment, OccupancyRow, OccupancyTable};
pub use train::{
    gvr_train, ser_weight, BatchSource, EpsilonSchedule, GvrConfig, IterationRecord, LrSchedule,
    TrainingRecord, Variant,
};
pub use value::{Decomposition, Sample, ValueLearner};

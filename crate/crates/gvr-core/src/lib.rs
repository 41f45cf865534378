//! Value-decomposition analysis for cooperative matrix games: closed-form joint Q values under
//! ε-greedy data, greedy transition diagrams, analytic bounds, and tabular LVD/MVD/GVR learners.

// `!(x > 0.0)` is how parameters reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod error;
pub mod experiments;
pub mod game;
pub mod graph;
pub mod learners;
pub mod linalg;
pub mod par;

pub use error::{GvrError, Result};
pub use game::{JointAction, PayoffMatrix};


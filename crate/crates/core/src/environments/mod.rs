//! Benchmark tasks: deterministic rollouts from policy parameters to outcome
//! points.

mod arm;
mod geometry;
mod maze;

pub use arm::{impact_point, ArmSpec, BallisticEnv, BoundsShape, Release, JOINTS, MIN_BOUNDS_HALF_WIDTH};
pub use geometry::{segments_intersect, Segment};
pub use maze::{
    CellRanks, MazeEnv, MazeSpec, ProgressMap, Step, DEFAULT_ACTION_BOUND, DEFAULT_HORIZON, SIMPLEMAZE_V1,
    SIMPLEMAZE_V1_RANKS,
};

use crate::error::Result;
use crate::policies::Topology;
use crate::sel_exp::OutcomeBounds;

/// Ordered states visited by a rollout plus the resulting outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub outcome: Vec<f64>,
}

/// A task mapping policy parameters to an outcome in a bounded space.
///
/// Rollouts are pure functions of the parameters, so implementations must be
/// shareable across threads.
pub trait PolicyEnv: Send + Sync {
    fn name(&self) -> &str;
    fn topology(&self) -> &Topology;
    fn outcome_dim(&self) -> usize {
        2
    }
    fn reachable_bounds(&self) -> OutcomeBounds;
    /// Outcome only; implementations skip recording intermediate states.
    fn evaluate(&self, params: &[f64]) -> Result<Vec<f64>>;
    fn trajectory(&self, params: &[f64]) -> Result<Trajectory>;
}

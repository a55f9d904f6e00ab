//! Selection-expansion exploration: motion-planning trees (RRT, EST) and
//! policy-space diversity search (novelty search, goal exploration, random
//! search) over a 2D maze and a ballistic throwing arm.

pub mod environments;
pub mod error;
pub mod explorers;
pub mod metrics;
pub mod planners;
pub mod policies;
pub mod rng;
pub mod sel_exp;
pub mod spatial;

pub use error::{Error, Result};

//! Sampling-based planners: a geometric RRT that seeds paths, and kinodynamic RRTs
//! for one robot, a prioritized team, or a team in its composite state space.

mod kinematic;
mod kinodynamic;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::State;
use crate::geometry::Pose;

pub use kinematic::{plan_kinematic, KinematicParams};
pub use kinodynamic::{
    plan_composite_rrt, plan_decoupled_rrt, plan_kinodynamic_rrt, weighted_distance, RrtParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no plan found within {attempts} attempts{}", robot.map(|r| format!(" (robot {r})")).unwrap_or_default())]
    BudgetExhausted { robot: Option<usize>, attempts: usize },
    #[error("deadline reached")]
    Timeout,
}

/// A single-robot query: reach the ball of radius `alpha` around `goal` from `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub start: State,
    pub goal: State,
    pub alpha: f64,
}

impl Query {
    pub fn new(start: State, goal: State, alpha: f64) -> Self {
        Self { start, goal, alpha }
    }
}

/// Waypoints of a geometric path for one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicPath {
    pub configurations: Vec<Pose>,
}

impl KinematicPath {
    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }
}

pub(crate) fn expired(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

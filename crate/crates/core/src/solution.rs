use serde::{Deserialize, Serialize};

use crate::dynamics::StitchedTrajectory;

/// Which conflict-resolution solver produced a subproblem's trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rung {
    Prioritized,
    DecoupledRrt,
    CompositeRrt,
}

impl Rung {
    pub const ALL: [Rung; 3] = [Rung::Prioritized, Rung::DecoupledRrt, Rung::CompositeRrt];

    pub fn name(self) -> &'static str {
        match self {
            Rung::Prioritized => "prioritized",
            Rung::DecoupledRrt => "decoupled-rrt",
            Rung::CompositeRrt => "composite-rrt",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub runtime_s: f64,
    pub path_cost: f64,
    pub conflicts_resolved: usize,
    pub rung_prioritized: usize,
    pub rung_decoupled: usize,
    pub rung_composite: usize,
    pub max_adaptation_level: usize,
    /// Segment optimizations that fell back to sampling.
    pub segment_fallbacks: usize,
}

impl Metrics {
    pub fn record_rung(&mut self, rung: Rung) {
        match rung {
            Rung::Prioritized => self.rung_prioritized += 1,
            Rung::DecoupledRrt => self.rung_decoupled += 1,
            Rung::CompositeRrt => self.rung_composite += 1,
        }
    }

    pub fn rung_total(&self) -> usize {
        self.rung_prioritized + self.rung_decoupled + self.rung_composite
    }
}

/// One trajectory per robot, in scenario order.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub trajectories: Vec<StitchedTrajectory>,
    pub metrics: Metrics,
}

/// Sum over robots of transitions times timestep.
pub fn path_cost(trajectories: &[StitchedTrajectory]) -> f64 {
    trajectories.iter().map(StitchedTrajectory::path_cost).sum()
}

impl Solution {
    pub fn new(trajectories: Vec<StitchedTrajectory>, mut metrics: Metrics) -> Self {
        metrics.path_cost = path_cost(&trajectories);
        Self {
            trajectories,
            metrics,
        }
    }
}

//! Multi-robot problem instances and their on-disk form.

mod builders;
mod file;

use thiserror::Error;

use crate::dynamics::{extract_configuration, position, ModelKind, RobotModel, State};
use crate::geometry::{in_free_space, Workspace};

pub use builders::{
    build_cluttered_cross, build_cluttered_cross_with, build_open_cross, build_quadrotor_cross,
    build_quadrotor_inlet, ClutterParams, CROSS_HALF_WIDTH,
};
pub use file::{load_scenario, parse_scenario, save_scenario, scenario_to_json};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Input(String),
    #[error("robot {robot}: {what} configuration is not in free space")]
    NotFree { robot: usize, what: &'static str },
    #[error("robots {0} and {1} start closer than d_min")]
    StartsTooClose(usize, usize),
    #[error("robots must share one model kind")]
    Heterogeneous,
    #[error(transparent)]
    Model(#[from] crate::dynamics::ModelError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct RobotSpec {
    pub id: String,
    pub model: RobotModel,
    pub start: State,
    pub goal: State,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub workspace: Workspace,
    pub robots: Vec<RobotSpec>,
    pub d_min: f64,
}

/// Goal tolerance used when a robot does not specify one.
pub fn default_alpha(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::Quadrotor2 => 0.5,
        _ => 0.2,
    }
}

/// Sum of circumradii of two bodies.
pub fn default_d_min(a: &RobotModel, b: &RobotModel) -> f64 {
    a.body.circumradius() + b.body.circumradius()
}

/// Center distance between two robots' positions.
pub fn separation(ma: &RobotModel, a: &[f64], mb: &RobotModel, b: &[f64]) -> f64 {
    let (p, q) = (position(ma, a), position(mb, b));
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        workspace: Workspace,
        robots: Vec<RobotSpec>,
        d_min: f64,
    ) -> Result<Self, ScenarioError> {
        let s = Self {
            name: name.into(),
            workspace,
            robots,
            d_min,
        };
        s.check()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.robots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.robots.is_empty()
    }

    pub fn models(&self) -> Vec<&RobotModel> {
        self.robots.iter().map(|r| &r.model).collect()
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        if self.robots.is_empty() {
            return Err(ScenarioError::Input("scenario has no robots".into()));
        }
        if !(self.d_min >= 0.0 && self.d_min.is_finite()) {
            return Err(ScenarioError::Input(format!("invalid d_min {}", self.d_min)));
        }
        let kind = self.robots[0].model.kind;
        for (i, r) in self.robots.iter().enumerate() {
            if r.model.kind != kind {
                return Err(ScenarioError::Heterogeneous);
            }
            r.model.validate()?;
            if r.model.kind.workspace_dim() != self.workspace.dim() {
                return Err(ScenarioError::Input(format!(
                    "robot {i} does not match the workspace dimension"
                )));
            }
            let n = r.model.state_dim();
            if r.start.len() != n || r.goal.len() != n {
                return Err(ScenarioError::Input(format!(
                    "robot {i}: start/goal must have {n} components"
                )));
            }
            if !(r.alpha > 0.0 && r.alpha.is_finite()) {
                return Err(ScenarioError::Input(format!("robot {i}: alpha must be positive")));
            }
            for (what, x) in [("start", &r.start), ("goal", &r.goal)] {
                let pose = extract_configuration(&r.model, x);
                if !in_free_space(&r.model.body, &pose, &self.workspace) {
                    return Err(ScenarioError::NotFree { robot: i, what });
                }
            }
        }
        for i in 0..self.robots.len() {
            for j in i + 1..self.robots.len() {
                let (a, b) = (&self.robots[i], &self.robots[j]);
                if separation(&a.model, &a.start, &b.model, &b.start) < self.d_min {
                    return Err(ScenarioError::StartsTooClose(i, j));
                }
            }
        }
        Ok(())
    }
}

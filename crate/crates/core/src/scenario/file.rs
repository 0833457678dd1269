use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::{default_alpha, RobotSpec, Scenario, ScenarioError};
use crate::dynamics::{BoxBounds, ModelKind, RobotModel, State};
use crate::geometry::{Aabb, ConvexPolytope, Dim, Obstacle, Point, Pose, Workspace};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default = "default_name")]
    name: String,
    workspace: WorkspaceDoc,
    robots: Vec<RobotDoc>,
    d_min: f64,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkspaceDoc {
    bounds: BoundsDoc,
    #[serde(default)]
    obstacles: Vec<ObstacleDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsDoc {
    min: Vec<f64>,
    max: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleDoc {
    vertices: Vec<Vec<f64>>,
    #[serde(default)]
    pose: PoseDoc,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PoseDoc {
    x: f64,
    y: f64,
    z: f64,
    roll: f64,
    pitch: f64,
    yaw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    model: ModelDoc,
    start: Vec<f64>,
    goal: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
}

/// Distinguishes an absent field from an explicit `null`.
fn explicit<'de, D: Deserializer<'de>, T: Deserialize<'de>>(d: D) -> Result<Option<T>, D::Error> {
    T::deserialize(d).map(Some)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    control_bounds: Option<BoxBounds>,
    #[serde(default, deserialize_with = "explicit", skip_serializing_if = "Option::is_none")]
    velocity_bounds: Option<Option<BoxBounds>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    body: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inertia: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gravity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt_bounds: Option<[f64; 2]>,
}

fn polytope(dim: Dim, rows: &[Vec<f64>], what: &str) -> Result<ConvexPolytope, ScenarioError> {
    let n = dim.count();
    let mut pts = Vec::with_capacity(rows.len());
    for row in rows {
        if row.len() != n {
            return Err(ScenarioError::Parse(format!(
                "{what}: vertex has {} coordinates, expected {n}",
                row.len()
            )));
        }
        pts.push(Point::new(row[0], row[1], if n == 3 { row[2] } else { 0.0 }));
    }
    Ok(ConvexPolytope::new(dim, pts)?)
}

fn rows(poly: &ConvexPolytope) -> Vec<Vec<f64>> {
    let n = poly.dim().count();
    poly.vertices().iter().map(|p| p.as_slice()[..n].to_vec()).collect()
}

impl ModelDoc {
    fn into_model(self, dim: Dim) -> Result<RobotModel, ScenarioError> {
        let mut m = RobotModel::default_for(self.kind);
        if let Some(b) = self.control_bounds {
            m.control_bounds = b;
        }
        if let Some(v) = self.velocity_bounds {
            m.velocity_bounds = v;
        }
        if let Some(body) = self.body {
            m.body = polytope(dim, &body, "robot body")?;
        }
        if let Some(v) = self.mass {
            m.mass = v;
        }
        if let Some(v) = self.inertia {
            m.inertia = v;
        }
        if let Some(v) = self.gravity {
            m.gravity = v;
        }
        if let Some([lo, hi]) = self.dt_bounds {
            m.dt_bounds = (lo, hi);
        }
        Ok(m)
    }

    fn from_model(m: &RobotModel) -> Self {
        Self {
            kind: m.kind,
            control_bounds: Some(m.control_bounds.clone()),
            velocity_bounds: Some(m.velocity_bounds.clone()),
            body: Some(rows(&m.body)),
            mass: Some(m.mass),
            inertia: Some(m.inertia),
            gravity: Some(m.gravity),
            dt_bounds: Some([m.dt_bounds.0, m.dt_bounds.1]),
        }
    }
}

impl ScenarioDoc {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let dim = match self.workspace.bounds.min.len() {
            2 => Dim::Planar,
            3 => Dim::Spatial,
            n => return Err(ScenarioError::Parse(format!("workspace.bounds.min has {n} entries"))),
        };
        if self.workspace.bounds.max.len() != dim.count() {
            return Err(ScenarioError::Parse("workspace.bounds.max length differs from min".into()));
        }
        let corner = |v: &[f64]| Point::new(v[0], v[1], v.get(2).copied().unwrap_or(0.0));
        let bounds = Aabb {
            min: corner(&self.workspace.bounds.min),
            max: corner(&self.workspace.bounds.max),
        };
        let mut obstacles = Vec::with_capacity(self.workspace.obstacles.len());
        for (i, o) in self.workspace.obstacles.iter().enumerate() {
            let shape = polytope(dim, &o.vertices, &format!("workspace.obstacles[{i}]"))?;
            let p = &o.pose;
            let pose = match dim {
                Dim::Planar => Pose::planar(p.x, p.y, p.yaw),
                Dim::Spatial => Pose::spatial(p.x, p.y, p.z, p.roll, p.pitch, p.yaw),
            };
            obstacles.push(Obstacle::new(shape, pose));
        }
        let workspace = Workspace::new(dim, bounds, obstacles)?;
        let mut robots = Vec::with_capacity(self.robots.len());
        for (i, r) in self.robots.into_iter().enumerate() {
            let model = r.model.into_model(dim)?;
            robots.push(RobotSpec {
                id: r.id.unwrap_or_else(|| format!("r{i}")),
                alpha: r.alpha.unwrap_or_else(|| default_alpha(model.kind)),
                model,
                start: State(r.start),
                goal: State(r.goal),
            });
        }
        Scenario::new(self.name, workspace, robots, self.d_min)
    }

    fn from_scenario(s: &Scenario) -> Self {
        let ws = &s.workspace;
        let n = ws.dim().count();
        let b = ws.bounds();
        Self {
            name: s.name.clone(),
            workspace: WorkspaceDoc {
                bounds: BoundsDoc {
                    min: b.min.as_slice()[..n].to_vec(),
                    max: b.max.as_slice()[..n].to_vec(),
                },
                obstacles: ws
                    .obstacles()
                    .iter()
                    .map(|o| {
                        let p = o.pose();
                        ObstacleDoc {
                            vertices: rows(o.shape()),
                            pose: PoseDoc {
                                x: p.translation.x,
                                y: p.translation.y,
                                z: p.translation.z,
                                roll: p.roll,
                                pitch: p.pitch,
                                yaw: p.yaw,
                            },
                        }
                    })
                    .collect(),
            },
            robots: s
                .robots
                .iter()
                .map(|r| RobotDoc {
                    id: Some(r.id.clone()),
                    model: ModelDoc::from_model(&r.model),
                    start: r.start.0.clone(),
                    goal: r.goal.0.clone(),
                    alpha: Some(r.alpha),
                })
                .collect(),
            d_min: s.d_min,
        }
    }
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioDoc::from_scenario(s)).expect("scenario serializes")
}

/// Parses a scenario document; errors carry the offending field and line.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    doc.into_scenario()
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<(), ScenarioError> {
    std::fs::write(path, scenario_to_json(s) + "\n")?;
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

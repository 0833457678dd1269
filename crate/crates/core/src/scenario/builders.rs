//! Procedural benchmark layouts.
//!
//! Cross layouts put robots in two columns at `x = -CROSS_HALF_WIDTH` and
//! `x = +CROSS_HALF_WIDTH`, one row per robot pair, rows spaced by
//! `2 d_min + diameter`. Each robot's goal is its row partner's start position.

use std::f64::consts::PI;

use super::{default_alpha, default_d_min, RobotSpec, Scenario, ScenarioError};
use crate::dynamics::{ModelKind, RobotModel, State};
use crate::geometry::{Aabb, ConvexPolytope, Dim, Obstacle, Point, Pose, Workspace};

pub const CROSS_HALF_WIDTH: f64 = 2.0;

const CROSS_MARGIN: f64 = 1.0;
const QUAD_ALTITUDE: f64 = 1.0;

struct Layout {
    rows: Vec<f64>,
    d_min: f64,
    pitch: f64,
}

fn layout(n: usize, model: &RobotModel) -> Result<Layout, ScenarioError> {
    if n == 0 || n % 2 != 0 {
        return Err(ScenarioError::Input(format!("robot count must be a positive even number, got {n}")));
    }
    let d_min = default_d_min(model, model);
    let pitch = 2.0 * d_min + 2.0 * model.body.circumradius();
    let count = n / 2;
    let rows = (0..count)
        .map(|r| (r as f64 - (count as f64 - 1.0) / 2.0) * pitch)
        .collect();
    Ok(Layout { rows, d_min, pitch })
}

fn cross_robots(layout: &Layout, model: &RobotModel) -> Vec<RobotSpec> {
    let w = CROSS_HALF_WIDTH;
    let alpha = default_alpha(model.kind);
    let mut robots = Vec::with_capacity(2 * layout.rows.len());
    for (r, &y) in layout.rows.iter().enumerate() {
        for (side, x, heading) in [("l", -w, 0.0), ("r", w, PI)] {
            let (start, goal) = match model.kind {
                ModelKind::Quadrotor2 => {
                    let at = |x: f64| {
                        let mut s = vec![0.0; 12];
                        s[..3].copy_from_slice(&[x, y, QUAD_ALTITUDE]);
                        State(s)
                    };
                    (at(x), at(-x))
                }
                k => {
                    let at = |x: f64| {
                        let mut s = vec![0.0; k.state_dim()];
                        s[..3].copy_from_slice(&[x, y, heading]);
                        State(s)
                    };
                    (at(x), at(-x))
                }
            };
            robots.push(RobotSpec {
                id: format!("row{r}_{side}"),
                model: model.clone(),
                start,
                goal,
                alpha,
            });
        }
    }
    robots
}

fn planar_model(kind: ModelKind) -> Result<RobotModel, ScenarioError> {
    match kind {
        ModelKind::Unicycle1 | ModelKind::Unicycle2 => Ok(RobotModel::default_for(kind)),
        ModelKind::Quadrotor2 => Err(ScenarioError::Input("cross layouts take a unicycle model".into())),
    }
}

fn cross_bounds(layout: &Layout) -> Aabb {
    let top = layout.rows.last().copied().unwrap_or(0.0) + layout.pitch;
    let x = CROSS_HALF_WIDTH + CROSS_MARGIN;
    Aabb {
        min: Point::new(-x, -top, 0.0),
        max: Point::new(x, top, 0.0),
    }
}

/// Rows of robots swapping sides in an empty workspace.
pub fn build_open_cross(n: usize, kind: ModelKind) -> Result<Scenario, ScenarioError> {
    let model = planar_model(kind)?;
    let l = layout(n, &model)?;
    let ws = Workspace::new(Dim::Planar, cross_bounds(&l), vec![])?;
    Scenario::new(format!("open_cross_{n}"), ws, cross_robots(&l, &model), l.d_min)
}

/// Obstacle grid for the cluttered cross.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterParams {
    /// Side length of each square obstacle.
    pub size: f64,
    /// Fraction of grid cells that receive an obstacle, in `[0, 1]`.
    pub density: f64,
    /// Grid spacing along x; obstacles sit between the two robot columns.
    pub spacing: f64,
}

impl Default for ClutterParams {
    fn default() -> Self {
        Self {
            size: 0.2,
            density: 1.0,
            spacing: 1.0,
        }
    }
}

/// Open-cross starts and goals with square obstacles placed midway between rows, so
/// every row keeps a corridor of width `pitch - size`.
pub fn build_cluttered_cross(n: usize, kind: ModelKind) -> Result<Scenario, ScenarioError> {
    build_cluttered_cross_with(n, kind, ClutterParams::default())
}

pub fn build_cluttered_cross_with(
    n: usize,
    kind: ModelKind,
    params: ClutterParams,
) -> Result<Scenario, ScenarioError> {
    let model = planar_model(kind)?;
    let l = layout(n, &model)?;
    if !(0.0..=1.0).contains(&params.density) || params.size <= 0.0 || params.spacing <= 0.0 {
        return Err(ScenarioError::Input("invalid clutter parameters".into()));
    }
    let corridor = l.pitch - params.size;
    if corridor <= 2.0 * model.body.circumradius() + l.d_min {
        return Err(ScenarioError::Input("obstacles leave corridors that are too narrow".into()));
    }
    let shape = ConvexPolytope::rectangle(params.size, params.size)?;
    let half_cols = ((CROSS_HALF_WIDTH - 0.5) / params.spacing).floor() as i64;
    let mut ys: Vec<f64> = l.rows.iter().map(|y| y - l.pitch / 2.0).collect();
    ys.push(l.rows.last().unwrap() + l.pitch / 2.0);
    let keep = (params.density * 10.0).round() as i64;
    let mut obstacles = Vec::new();
    for (r, &y) in ys.iter().enumerate() {
        for c in -half_cols..=half_cols {
            if (c + half_cols + 3 * r as i64).rem_euclid(10) * 7 % 10 >= keep {
                continue;
            }
            let x = c as f64 * params.spacing;
            obstacles.push(Obstacle::new(shape.clone(), Pose::planar(x, y, 0.0)));
        }
    }
    let ws = Workspace::new(Dim::Planar, cross_bounds(&l), obstacles)?;
    let name = if params == ClutterParams::default() {
        format!("cluttered_cross_{n}")
    } else {
        format!("cluttered_cross_{n}_d{}", params.density)
    };
    Scenario::new(name, ws, cross_robots(&l, &model), l.d_min)
}

/// Quadrotors swapping sides at a common altitude in an empty volume.
pub fn build_quadrotor_cross(n: usize) -> Result<Scenario, ScenarioError> {
    let model = RobotModel::quadrotor2();
    let l = layout(n, &model)?;
    let mut b = cross_bounds(&l);
    b.max.z = 2.0 * QUAD_ALTITUDE;
    let ws = Workspace::new(Dim::Spatial, b, vec![])?;
    Scenario::new(format!("quadrotor_cross_{n}"), ws, cross_robots(&l, &model), l.d_min)
}

/// Inlet geometry, in meters.
pub mod inlet {
    pub const LENGTH: f64 = 5.0;
    pub const CORRIDOR_WIDTH: f64 = 0.55;
    pub const HEIGHT: f64 = 0.4;
    pub const POCKET_X: (f64, f64) = (-0.5, 0.5);
    pub const POCKET_DEPTH: f64 = 1.0;
    pub const START_X: f64 = 2.0;
}

/// A low corridor along x with one side pocket midway; two quadrotors swap ends.
/// The corridor is too tight for the robots to pass each other, so one of them has to
/// step into the pocket.
pub fn build_quadrotor_inlet() -> Result<Scenario, ScenarioError> {
    use inlet::*;
    let model = RobotModel::quadrotor2();
    let d_min = default_d_min(&model, &model);
    let half_w = CORRIDOR_WIDTH / 2.0;
    let top = half_w + POCKET_DEPTH;
    let bounds = Aabb {
        min: Point::new(-LENGTH / 2.0, -half_w, 0.0),
        max: Point::new(LENGTH / 2.0, top, HEIGHT),
    };
    let wall = |x0: f64, x1: f64| -> Result<Obstacle, ScenarioError> {
        let shape = ConvexPolytope::cuboid(x1 - x0, POCKET_DEPTH, HEIGHT)?;
        Ok(Obstacle::new(
            shape,
            Pose::spatial((x0 + x1) / 2.0, half_w + POCKET_DEPTH / 2.0, HEIGHT / 2.0, 0.0, 0.0, 0.0),
        ))
    };
    let obstacles = vec![wall(-LENGTH / 2.0, POCKET_X.0)?, wall(POCKET_X.1, LENGTH / 2.0)?];
    let ws = Workspace::new(Dim::Spatial, bounds, obstacles)?;
    let at = |x: f64| {
        let mut s = vec![0.0; 12];
        s[..3].copy_from_slice(&[x, 0.0, HEIGHT / 2.0]);
        State(s)
    };
    let alpha = default_alpha(ModelKind::Quadrotor2);
    let robots = vec![
        RobotSpec {
            id: "west".into(),
            model: model.clone(),
            start: at(-START_X),
            goal: at(START_X),
            alpha,
        },
        RobotSpec {
            id: "east".into(),
            model,
            start: at(START_X),
            goal: at(-START_X),
            alpha,
        },
    ];
    Scenario::new("quadrotor_inlet", ws, robots, d_min)
}

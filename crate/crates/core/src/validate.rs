//! Whole-solution checker for the multi-robot problem.
//!
//! Independent of the planners: it only uses the model step and geometry primitives,
//! and re-derives time alignment on its own.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::dynamics::{
    extract_configuration, position, state_difference, state_distance, transition_defect,
    StitchedTrajectory,
};
use crate::geometry::clearance;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Shape,
    Continuity,
    Start,
    Goal,
    Dynamics,
    ControlBounds,
    StateBounds,
    FreeSpace,
    Separation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub robot: usize,
    /// Global knot index along the robot's stitched trajectory.
    pub index: usize,
    pub other: Option<usize>,
    pub other_index: Option<usize>,
    pub time: f64,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} robot {} k={}", self.kind, self.robot, self.index)?;
        if let (Some(o), Some(k)) = (self.other, self.other_index) {
            write!(f, " vs robot {o} k={k}")?;
        }
        write!(f, " t={:.4} magnitude={:.3e}", self.time, self.magnitude)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub start: f64,
    pub dynamics: f64,
    pub control: f64,
    /// Knot times closer than this are simultaneous.
    pub time: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            start: 1e-9,
            dynamics: 1e-6,
            control: 1e-9,
            time: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn of_kind(&self, kind: ViolationKind) -> Vec<&Violation> {
        self.violations.iter().filter(|v| v.kind == kind).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_solution(scenario: &Scenario, trajectories: &[StitchedTrajectory]) -> ValidationReport {
    validate_with(scenario, trajectories, &Tolerances::default())
}

struct Flat {
    times: Vec<f64>,
    positions: Vec<[f64; 3]>,
}

impl Flat {
    /// Last knot at or before `t`, first knot before the start, last knot after the end.
    fn at(&self, t: f64, eps: f64) -> usize {
        let mut lo = 0;
        let mut hi = self.times.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.times[mid] <= t + eps {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo.saturating_sub(1)
    }
}

fn shape_errors(scenario: &Scenario, robot: usize, traj: &StitchedTrajectory) -> Vec<Violation> {
    let m = &scenario.robots[robot].model;
    let (n, c) = (m.state_dim(), m.control_dim());
    let bad = |index: usize, kind| Violation {
        kind,
        robot,
        index,
        other: None,
        other_index: None,
        time: 0.0,
        magnitude: f64::NAN,
    };
    if traj.pieces.is_empty() {
        return vec![bad(0, ViolationKind::Shape)];
    }
    let mut out = Vec::new();
    let mut base = 0;
    for (p, piece) in traj.pieces.iter().enumerate() {
        let ok = !piece.states.is_empty()
            && piece.controls.len() + 1 == piece.states.len()
            && piece.states.iter().all(|x| x.len() == n && x.iter().all(|v| v.is_finite()))
            && piece.controls.iter().all(|u| u.len() == c && u.iter().all(|v| v.is_finite()))
            && piece.dt > 0.0
            && piece.dt.is_finite();
        if !ok {
            out.push(bad(base, ViolationKind::Shape));
            return out;
        }
        if p > 0 && traj.pieces[p - 1].last() != piece.first() {
            out.push(bad(base, ViolationKind::Continuity));
        }
        base += piece.len() - 1;
    }
    out
}

pub fn validate_with(
    scenario: &Scenario,
    trajectories: &[StitchedTrajectory],
    tol: &Tolerances,
) -> ValidationReport {
    let mut violations = Vec::new();
    if trajectories.len() != scenario.robots.len() {
        violations.push(Violation {
            kind: ViolationKind::Shape,
            robot: trajectories.len().min(scenario.robots.len()),
            index: 0,
            other: None,
            other_index: None,
            time: 0.0,
            magnitude: f64::NAN,
        });
        return ValidationReport { violations };
    }
    let mut flats: Vec<Option<Flat>> = Vec::with_capacity(trajectories.len());
    for (r, traj) in trajectories.iter().enumerate() {
        let shape = shape_errors(scenario, r, traj);
        let fatal = shape.iter().any(|v| v.kind == ViolationKind::Shape);
        violations.extend(shape);
        if fatal {
            flats.push(None);
            continue;
        }
        let spec = &scenario.robots[r];
        let m = &spec.model;
        let states = traj.states();
        let times = traj.knot_times();
        let v = |kind, index: usize, magnitude| Violation {
            kind,
            robot: r,
            index,
            other: None,
            other_index: None,
            time: times[index],
            magnitude,
        };

        let start_err = state_difference(m, states[0], &spec.start)
            .iter()
            .fold(0.0, |a: f64, d| a.max(d.abs()));
        if start_err > tol.start {
            violations.push(v(ViolationKind::Start, 0, start_err));
        }
        let last = states.len() - 1;
        let goal_err = state_distance(m, states[last], &spec.goal);
        if goal_err > spec.alpha {
            violations.push(v(ViolationKind::Goal, last, goal_err - spec.alpha));
        }
        for (k, x, u, next, dt) in traj.transitions() {
            let defect = transition_defect(m, x, u, next, dt);
            if defect > tol.dynamics {
                violations.push(v(ViolationKind::Dynamics, k + 1, defect));
            }
            let excess = m.control_bounds.excess(u);
            if excess > tol.control {
                violations.push(v(ViolationKind::ControlBounds, k, excess));
            }
        }
        if let Some(vb) = &m.velocity_bounds {
            let idx = m.kind.velocity_indices();
            for (k, x) in states.iter().enumerate() {
                let vel: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
                let excess = vb.excess(&vel);
                if excess > tol.control {
                    violations.push(v(ViolationKind::StateBounds, k, excess));
                }
            }
        }
        for (k, x) in states.iter().enumerate() {
            let c = clearance(&m.body, &extract_configuration(m, x), &scenario.workspace);
            if c <= 0.0 {
                violations.push(v(ViolationKind::FreeSpace, k, -c));
            }
        }
        flats.push(Some(Flat {
            positions: states.iter().map(|x| position(m, x)).collect(),
            times,
        }));
    }

    for i in 0..flats.len() {
        for j in i + 1..flats.len() {
            let (Some(a), Some(b)) = (&flats[i], &flats[j]) else {
                continue;
            };
            let mut seen = BTreeSet::new();
            let mut instants: Vec<f64> = a.times.iter().chain(&b.times).copied().collect();
            instants.sort_by(f64::total_cmp);
            for t in instants {
                let (ka, kb) = (a.at(t, tol.time), b.at(t, tol.time));
                if !seen.insert((ka, kb)) {
                    continue;
                }
                let (p, q) = (a.positions[ka], b.positions[kb]);
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                if d < scenario.d_min {
                    violations.push(Violation {
                        kind: ViolationKind::Separation,
                        robot: i,
                        index: ka,
                        other: Some(j),
                        other_index: Some(kb),
                        time: t,
                        magnitude: scenario.d_min - d,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

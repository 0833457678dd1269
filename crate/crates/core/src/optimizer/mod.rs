//! Direct transcription of the single-robot trajectory problem (states, controls and
//! one shared timestep as decision variables) solved by an augmented Lagrangian around
//! Levenberg-Marquardt, plus the prioritized multi-robot variant.

mod band;

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    extract_configuration, position, state_distance, Control, ModelKind, RobotModel, State, Trajectory,
};
use crate::geometry::{angle_diff, clearance, soft_clearance, Pose, Workspace};
use crate::sampling::{expired, KinematicPath, Query};
use crate::timeline::{distance3, pair_conflict, MovingObstacles, Timeline};
use band::ArrowBand;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerParams {
    /// Control penalty weight.
    pub beta1: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Dynamics defect tolerance of a returned trajectory.
    pub eps_dyn: f64,
    /// Inequality violation tolerance.
    pub eps_con: f64,
    /// Relative cost change between outer iterations treated as converged.
    pub cost_tol: f64,
    pub clearance_margin: f64,
    /// Softmin width of the smoothed clearance.
    pub smoothing: f64,
    /// The goal ball is tightened to this fraction of the tolerance.
    pub goal_shrink: f64,
    /// Added to the separation distance.
    pub separation_margin: f64,
    /// Velocity bounds are tightened by this much.
    pub velocity_margin: f64,
    pub mu0: f64,
    pub mu_growth: f64,
    pub mu_max: f64,
    /// Horizon floor for the second-order unicycle.
    pub min_knots_unicycle2: usize,
    /// Horizon floor for the quadrotor.
    pub min_knots_quadrotor: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            beta1: 0.1,
            max_outer: 30,
            max_inner: 200,
            eps_dyn: 1e-6,
            eps_con: 1e-4,
            cost_tol: 1e-6,
            clearance_margin: 0.01,
            smoothing: 0.05,
            goal_shrink: 0.95,
            separation_margin: 0.01,
            velocity_margin: 1e-3,
            mu0: 10.0,
            mu_growth: 10.0,
            mu_max: 1e10,
            min_knots_unicycle2: 15,
            min_knots_quadrotor: 15,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum OptimizeError {
    #[error("invalid optimization input: {0}")]
    InvalidInput(String),
    #[error("optimization failed for robot {robot:?} with violation {violation:.3e}")]
    NotConverged {
        robot: Option<usize>,
        violation: f64,
        /// Best iterate, not necessarily dynamically consistent.
        best: Box<Trajectory>,
    },
    #[error("optimization timed out")]
    Timeout,
}

impl OptimizeError {
    fn for_robot(self, r: usize) -> Self {
        match self {
            OptimizeError::NotConverged { violation, best, .. } => OptimizeError::NotConverged {
                robot: Some(r),
                violation,
                best,
            },
            other => other,
        }
    }
}

/// One accepted outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub iteration: usize,
    pub cost: f64,
    pub max_violation: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub trajectory: Trajectory,
    pub cost: f64,
    pub outer_iterations: usize,
}

/// A transcribed single-robot problem with its initial guess.
#[derive(Debug, Clone)]
pub struct TranscriptionProblem<'a> {
    pub model: &'a RobotModel,
    pub workspace: &'a Workspace,
    pub start: State,
    pub goal: State,
    pub alpha: f64,
    pub horizon: usize,
    pub init_states: Vec<State>,
    pub init_controls: Vec<Control>,
    pub init_dt: f64,
    /// Positions every knot must keep `fixed_distance` from, regardless of time.
    pub fixed: Vec<[f64; 3]>,
    pub fixed_distance: f64,
    /// Time-aligned obstacles; local time zero is the first knot.
    pub moving: Option<MovingObstacles>,
}

impl TranscriptionProblem<'_> {
    pub fn defect_blocks(&self) -> usize {
        self.horizon - 1
    }

    pub fn num_variables(&self) -> usize {
        (self.horizon - 1) * (self.model.state_dim() + self.model.control_dim()) + 1
    }

    /// Keeps every knot at least `distance` from each given position.
    pub fn with_fixed(mut self, points: Vec<[f64; 3]>, distance: f64) -> Self {
        self.fixed = points;
        self.fixed_distance = distance;
        self
    }

    pub fn with_moving(mut self, obstacles: MovingObstacles) -> Self {
        self.moving = (!obstacles.is_empty()).then_some(obstacles);
        self
    }
}

fn config_vector(model: &RobotModel, pose: &Pose) -> Vec<f64> {
    let t = pose.translation;
    match model.kind {
        ModelKind::Quadrotor2 => vec![t.x, t.y, t.z, pose.roll, pose.pitch, pose.yaw],
        _ => vec![t.x, t.y, pose.yaw],
    }
}

/// Resamples configurations to `count` knots, evenly spaced in arc length.
fn resample(model: &RobotModel, configs: &[Vec<f64>], count: usize) -> Vec<Vec<f64>> {
    if configs.len() == count {
        return configs.to_vec();
    }
    let pd = model.kind.position_dim();
    let mut arc = vec![0.0];
    for w in configs.windows(2) {
        let d: f64 = (0..pd).map(|a| (w[1][a] - w[0][a]).powi(2)).sum::<f64>().sqrt();
        arc.push(arc.last().unwrap() + d);
    }
    let total = *arc.last().unwrap();
    let last = configs.len() - 1;
    (0..count)
        .map(|j| {
            let f = if count == 1 { 0.0 } else { j as f64 / (count - 1) as f64 };
            let (i, frac) = if last == 0 {
                (0, 0.0)
            } else if total > 1e-12 {
                let s = f * total;
                let i = arc.partition_point(|&a| a <= s).clamp(1, last) - 1;
                let seg = arc[i + 1] - arc[i];
                (i, if seg > 1e-12 { ((s - arc[i]) / seg).clamp(0.0, 1.0) } else { 0.0 })
            } else {
                let s = f * last as f64;
                let i = (s.floor() as usize).min(last - 1);
                (i, s - i as f64)
            };
            let (a, b) = (&configs[i], &configs[(i + 1).min(last)]);
            a.iter()
                .zip(b)
                .enumerate()
                .map(|(c, (p, q))| {
                    if c < pd {
                        p + (q - p) * frac
                    } else {
                        p + angle_diff(*q, *p) * frac
                    }
                })
                .collect()
        })
        .collect()
}

/// Builds the transcription from a kinematic reference; the horizon is the reference
/// length, floored at 2 and at the model's minimum.
pub fn transcribe<'a>(
    model: &'a RobotModel,
    workspace: &'a Workspace,
    query: &Query,
    reference: &KinematicPath,
    params: &OptimizerParams,
) -> Result<TranscriptionProblem<'a>, OptimizeError> {
    if reference.is_empty() {
        return Err(OptimizeError::InvalidInput("empty reference".into()));
    }
    let n = model.state_dim();
    if query.start.len() != n || query.goal.len() != n {
        return Err(OptimizeError::InvalidInput("query dimension mismatch".into()));
    }
    if model.kind.workspace_dim() != workspace.dim() {
        return Err(OptimizeError::InvalidInput("model and workspace dimensions differ".into()));
    }
    let floor = match model.kind {
        ModelKind::Unicycle1 => 2,
        ModelKind::Unicycle2 => params.min_knots_unicycle2,
        ModelKind::Quadrotor2 => params.min_knots_quadrotor,
    };
    let horizon = reference.len().max(2).max(floor);
    let configs: Vec<Vec<f64>> = reference.configurations.iter().map(|p| config_vector(model, p)).collect();
    let configs = resample(model, &configs, horizon);
    let (lo, hi) = model.dt_bounds;
    let dt = 0.5 * (lo + hi);

    let mut states: Vec<State> = Vec::with_capacity(horizon);
    for (k, c) in configs.iter().enumerate() {
        let mut x = vec![0.0; n];
        x[..c.len()].copy_from_slice(c);
        if k + 1 < horizon && k > 0 {
            let next = &configs[k + 1];
            match model.kind {
                ModelKind::Unicycle2 => {
                    let (dx, dy) = (next[0] - c[0], next[1] - c[1]);
                    x[3] = (dx * c[2].cos() + dy * c[2].sin()) / dt;
                    x[4] = angle_diff(next[2], c[2]) / dt;
                }
                ModelKind::Quadrotor2 => {
                    for a in 0..3 {
                        x[6 + a] = (next[a] - c[a]) / dt;
                    }
                }
                ModelKind::Unicycle1 => {}
            }
            if let Some(vb) = &model.velocity_bounds {
                for (j, &i) in model.kind.velocity_indices().iter().enumerate() {
                    x[i] = x[i].clamp(vb.lo[j], vb.hi[j]);
                }
            }
        }
        states.push(State(x));
    }
    states[0] = query.start.clone();
    let controls = vec![model.reference_control(); horizon - 1];
    Ok(TranscriptionProblem {
        model,
        workspace,
        start: query.start.clone(),
        goal: query.goal.clone(),
        alpha: query.alpha,
        horizon,
        init_states: states,
        init_controls: controls,
        init_dt: dt,
        fixed: vec![],
        fixed_distance: 0.0,
        moving: None,
    })
}

/// Variable layout: stage `k` holds `u_k` followed by `x_{k+1}`; the timestep is last.
struct Layout {
    n: usize,
    m: usize,
    horizon: usize,
    len: usize,
}

impl Layout {
    fn x(&self, k: usize) -> Option<usize> {
        (k > 0).then(|| (k - 1) * (self.n + self.m) + self.m)
    }

    fn u(&self, k: usize) -> usize {
        k * (self.n + self.m)
    }

    fn dt(&self) -> usize {
        self.len - 1
    }

    fn bandwidth(&self) -> usize {
        2 * self.n + self.m
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Eq,
    /// `g <= 0`.
    Ineq,
}

/// A constraint value with its sparse gradient (empty when not requested).
struct Row<'r> {
    id: usize,
    kind: Kind,
    value: f64,
    grad: &'r [(usize, f64)],
}

struct Solver<'p, 'a> {
    p: &'p TranscriptionProblem<'a>,
    params: &'p OptimizerParams,
    lay: Layout,
    uref: Vec<f64>,
    vel: Vec<(usize, f64, f64)>,
    config_idx: Vec<usize>,
    alpha_opt: f64,
    n_static: usize,
}

/// Pairs `(knot, obstacle, obstacle knot)` checked for time-aligned separation.
type Pair = (usize, usize, usize);

struct Multipliers {
    fixed: Vec<f64>,
    pairs: Vec<Pair>,
    moving: Vec<f64>,
}

impl Multipliers {
    fn get(&self, id: usize, n_static: usize) -> f64 {
        if id < n_static {
            self.fixed[id]
        } else {
            self.moving[id - n_static]
        }
    }
}

impl<'p, 'a> Solver<'p, 'a> {
    fn new(p: &'p TranscriptionProblem<'a>, params: &'p OptimizerParams) -> Self {
        let model = p.model;
        let (n, m) = (model.state_dim(), model.control_dim());
        let lay = Layout {
            n,
            m,
            horizon: p.horizon,
            len: (p.horizon - 1) * (n + m) + 1,
        };
        let vel = match &model.velocity_bounds {
            Some(vb) => model
                .kind
                .velocity_indices()
                .iter()
                .enumerate()
                .map(|(j, &i)| {
                    let margin = params.velocity_margin.min(0.25 * (vb.hi[j] - vb.lo[j]));
                    (i, vb.lo[j] + margin, vb.hi[j] - margin)
                })
                .collect(),
            None => vec![],
        };
        let config_idx = (0..model.kind.config_dim()).collect();
        let t1 = p.horizon - 1;
        let n_static = t1 * n + 1 + t1 + 2 * t1 * m + 2 * t1 * vel.len() + 2 + t1 * p.fixed.len();
        Self {
            p,
            params,
            lay,
            uref: model.reference_control().0,
            vel,
            config_idx,
            alpha_opt: params.goal_shrink * p.alpha,
            n_static,
        }
    }

    fn pack(&self, states: &[State], controls: &[Control], dt: f64) -> Vec<f64> {
        let mut z = vec![0.0; self.lay.len];
        for k in 0..self.lay.horizon - 1 {
            let u = self.lay.u(k);
            z[u..u + self.lay.m].copy_from_slice(&controls[k]);
            let x = self.lay.x(k + 1).unwrap();
            z[x..x + self.lay.n].copy_from_slice(&states[k + 1]);
        }
        z[self.lay.dt()] = dt;
        z
    }

    fn state<'z>(&'z self, z: &'z [f64], k: usize) -> &'z [f64] {
        match self.lay.x(k) {
            Some(o) => &z[o..o + self.lay.n],
            None => &self.p.start,
        }
    }

    fn control<'z>(&self, z: &'z [f64], k: usize) -> &'z [f64] {
        let o = self.lay.u(k);
        &z[o..o + self.lay.m]
    }

    fn cost(&self, z: &[f64]) -> f64 {
        let dt = z[self.lay.dt()];
        (0..self.lay.horizon - 1)
            .map(|k| {
                let e: f64 = self.control(z, k).iter().zip(&self.uref).map(|(a, b)| (a - b) * (a - b)).sum();
                self.params.beta1 * e + dt
            })
            .sum()
    }

    fn pose(&self, x: &[f64]) -> Pose {
        extract_configuration(self.p.model, x)
    }

    /// Candidate time-aligned pairs for the current timestep: every obstacle knot within
    /// one step of a knot's hold interval (the last knot stays parked forever).
    fn moving_pairs(&self, z: &[f64]) -> Vec<Pair> {
        let Some(obs) = &self.p.moving else {
            return vec![];
        };
        let dt = z[self.lay.dt()];
        let t_end = self.lay.horizon - 1;
        let mut out = vec![];
        for k in 1..self.lay.horizon {
            let a = obs.t0 + (k as f64 - 1.0) * dt;
            let b = if k == t_end {
                f64::INFINITY
            } else {
                obs.t0 + (k as f64 + 2.0) * dt
            };
            for (o, tl) in obs.timelines.iter().enumerate() {
                let first = tl.index_at(a);
                for j in first..tl.len() {
                    if tl.times()[j] > b {
                        break;
                    }
                    out.push((k, o, j));
                }
            }
        }
        out
    }

    /// Visits every constraint. Gradients are produced only when `want` says the row
    /// contributes.
    fn constraints(&self, z: &[f64], pairs: &[Pair], want: &dyn Fn(usize, Kind, f64) -> bool, f: &mut dyn FnMut(Row)) {
        let lay = &self.lay;
        let model = self.p.model;
        let (n, m) = (lay.n, lay.m);
        let dt_i = lay.dt();
        let dt = z[dt_i];
        let t1 = lay.horizon - 1;
        let mut id = 0;
        let mut g: Vec<(usize, f64)> = Vec::with_capacity(2 * n + m + 1);
        let mut fx = vec![0.0; n];

        for k in 0..t1 {
            let x = self.state(z, k);
            let u = self.control(z, k);
            let xn = self.state(z, k + 1);
            model.derivative_into(x, u, &mut fx);
            let mut jac = None;
            for i in 0..n {
                let pred = x[i] + dt * fx[i];
                let value = if model.kind.is_angle(i) { angle_diff(xn[i], pred) } else { xn[i] - pred };
                g.clear();
                if want(id, Kind::Eq, value) {
                    let j = jac.get_or_insert_with(|| model.jacobians(x, u));
                    if let Some(o) = lay.x(k) {
                        for c in 0..n {
                            let v = -(if c == i { 1.0 } else { 0.0 }) - dt * j.dx(i, c);
                            if v != 0.0 {
                                g.push((o + c, v));
                            }
                        }
                    }
                    let uo = lay.u(k);
                    for c in 0..m {
                        let v = -dt * j.du(i, c);
                        if v != 0.0 {
                            g.push((uo + c, v));
                        }
                    }
                    g.push((lay.x(k + 1).unwrap() + i, 1.0));
                    if fx[i] != 0.0 {
                        g.push((dt_i, -fx[i]));
                    }
                }
                f(Row {
                    id,
                    kind: Kind::Eq,
                    value,
                    grad: &g,
                });
                id += 1;
            }
        }

        // Goal ball, scaled to distance units near its boundary.
        {
            let xt = self.state(z, t1);
            let d: Vec<f64> = xt
                .iter()
                .zip(self.p.goal.iter())
                .enumerate()
                .map(|(i, (a, b))| if model.kind.is_angle(i) { angle_diff(*a, *b) } else { a - b })
                .collect();
            let sq: f64 = d.iter().map(|v| v * v).sum();
            let value = (sq - self.alpha_opt * self.alpha_opt) / (2.0 * self.alpha_opt);
            g.clear();
            if want(id, Kind::Ineq, value) {
                let o = lay.x(t1).unwrap();
                for (i, v) in d.iter().enumerate() {
                    g.push((o + i, v / self.alpha_opt));
                }
            }
            f(Row {
                id,
                kind: Kind::Ineq,
                value,
                grad: &g,
            });
            id += 1;
        }

        // Smoothed clearance with a central-difference gradient.
        for k in 1..=t1 {
            let x = self.state(z, k);
            let body = &model.body;
            let clear = |x: &[f64]| soft_clearance(body, &self.pose(x), self.p.workspace, self.params.smoothing);
            let value = self.params.clearance_margin - clear(x);
            g.clear();
            if want(id, Kind::Ineq, value) {
                let o = lay.x(k).unwrap();
                let h = 1e-6;
                let mut xp = x.to_vec();
                for &c in &self.config_idx {
                    let v0 = xp[c];
                    xp[c] = v0 + h;
                    let fp = clear(&xp);
                    xp[c] = v0 - h;
                    let fm = clear(&xp);
                    xp[c] = v0;
                    let d = -(fp - fm) / (2.0 * h);
                    if d != 0.0 {
                        g.push((o + c, d));
                    }
                }
            }
            f(Row {
                id,
                kind: Kind::Ineq,
                value,
                grad: &g,
            });
            id += 1;
        }

        let single = |id: &mut usize, col: usize, value: f64, sign: f64, f: &mut dyn FnMut(Row)| {
            let row = [(col, sign)];
            let grad: &[(usize, f64)] = if want(*id, Kind::Ineq, value) { &row } else { &[] };
            f(Row {
                id: *id,
                kind: Kind::Ineq,
                value,
                grad,
            });
            *id += 1;
        };

        let cb = &model.control_bounds;
        for k in 0..t1 {
            let uo = lay.u(k);
            for c in 0..m {
                let u = z[uo + c];
                single(&mut id, uo + c, u - cb.hi[c], 1.0, f);
                single(&mut id, uo + c, cb.lo[c] - u, -1.0, f);
            }
        }
        for k in 1..=t1 {
            let o = lay.x(k).unwrap();
            for &(i, lo, hi) in &self.vel {
                single(&mut id, o + i, z[o + i] - hi, 1.0, f);
                single(&mut id, o + i, lo - z[o + i], -1.0, f);
            }
        }
        let (dt_lo, dt_hi) = model.dt_bounds;
        single(&mut id, dt_i, dt - dt_hi, 1.0, f);
        single(&mut id, dt_i, dt_lo - dt, -1.0, f);

        let sep = |id: usize, k: usize, q: &[f64; 3], dist: f64, g: &mut Vec<(usize, f64)>, f: &mut dyn FnMut(Row)| {
            let x = self.state(z, k);
            let p = position(model, x);
            let d = distance3(&p, q);
            let value = dist - d;
            g.clear();
            if want(id, Kind::Ineq, value) {
                let o = lay.x(k).unwrap();
                for a in 0..model.kind.position_dim() {
                    let dir = if d > 1e-12 { (p[a] - q[a]) / d } else if a == 0 { 1.0 } else { 0.0 };
                    g.push((o + a, -dir));
                }
            }
            f(Row {
                id,
                kind: Kind::Ineq,
                value,
                grad: g,
            });
        };
        for k in 1..=t1 {
            for q in &self.p.fixed {
                sep(id, k, q, self.p.fixed_distance, &mut g, f);
                id += 1;
            }
        }
        debug_assert_eq!(id, self.n_static);
        if let Some(obs) = &self.p.moving {
            let dist = obs.d_min + self.params.separation_margin;
            for (pi, &(k, o, j)) in pairs.iter().enumerate() {
                let q = obs.timelines[o].positions()[j];
                sep(self.n_static + pi, k, &q, dist, &mut g, f);
            }
        }
    }

    /// Augmented Lagrangian merit, optionally with its gradient and Gauss-Newton matrix.
    fn merit(&self, z: &[f64], lam: &Multipliers, mu: f64, out: Option<(&mut Vec<f64>, &mut ArrowBand)>) -> f64 {
        let lay = &self.lay;
        let sb = (2.0 * self.params.beta1).sqrt();
        let smu = mu.sqrt();
        let mut phi = 0.0;
        let with_grad = out.is_some();
        let (mut grad, mut h) = match out {
            Some((g, h)) => {
                g.iter_mut().for_each(|v| *v = 0.0);
                h.clear();
                (Some(g), Some(h))
            }
            None => (None, None),
        };
        for k in 0..lay.horizon - 1 {
            let uo = lay.u(k);
            for c in 0..lay.m {
                let r = sb * (z[uo + c] - self.uref[c]);
                phi += 0.5 * r * r;
                if let (Some(g), Some(h)) = (grad.as_deref_mut(), h.as_deref_mut()) {
                    g[uo + c] += r * sb;
                    h.add_diag(uo + c, sb * sb);
                }
            }
        }
        let t1 = (lay.horizon - 1) as f64;
        phi += t1 * z[lay.dt()];
        if let Some(g) = grad.as_deref_mut() {
            g[lay.dt()] += t1;
        }
        let n_static = self.n_static;
        let shift = |id: usize| lam.get(id, n_static) / mu;
        let want = |id: usize, kind: Kind, value: f64| {
            with_grad
                && match kind {
                    Kind::Eq => true,
                    Kind::Ineq => value + shift(id) > 0.0,
                }
        };
        self.constraints(z, &lam.pairs, &want, &mut |row: Row| {
            let t = row.value + shift(row.id);
            let active = match row.kind {
                Kind::Eq => true,
                Kind::Ineq => t > 0.0,
            };
            if !active {
                return;
            }
            let r = smu * t;
            phi += 0.5 * r * r;
            if let (Some(g), Some(h)) = (grad.as_deref_mut(), h.as_deref_mut()) {
                for &(c, v) in row.grad {
                    g[c] += r * smu * v;
                }
                h.add_outer(row.grad, mu);
            }
        });
        phi
    }

    /// Largest equality and inequality violations, plus updated multipliers.
    fn violations(&self, z: &[f64], lam: &Multipliers, mu: Option<f64>) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let mut eq: f64 = 0.0;
        let mut ineq: f64 = 0.0;
        let mut fixed = lam.fixed.clone();
        let mut moving = lam.moving.clone();
        let n_static = self.n_static;
        self.constraints(z, &lam.pairs, &|_, _, _| false, &mut |row: Row| {
            match row.kind {
                Kind::Eq => eq = eq.max(row.value.abs()),
                Kind::Ineq => ineq = ineq.max(row.value),
            }
            if let Some(mu) = mu {
                let slot = if row.id < n_static {
                    &mut fixed[row.id]
                } else {
                    &mut moving[row.id - n_static]
                };
                *slot = match row.kind {
                    Kind::Eq => *slot + mu * row.value,
                    Kind::Ineq => (*slot + mu * row.value).max(0.0),
                };
            }
        });
        (eq, ineq.max(0.0), fixed, moving)
    }

    /// Levenberg-Marquardt on the merit function.
    fn inner(&self, z: &mut Vec<f64>, lam: &Multipliers, mu: f64, deadline: Option<Instant>) -> Result<(), OptimizeError> {
        let len = self.lay.len;
        let mut grad = vec![0.0; len];
        let mut h = ArrowBand::new(len, self.lay.bandwidth());
        let mut phi = self.merit(z, lam, mu, Some((&mut grad, &mut h)));
        let mut damping = 1e-4;
        let mut trial = vec![0.0; len];
        for _ in 0..self.params.max_inner {
            if expired(deadline) {
                return Err(OptimizeError::Timeout);
            }
            let gnorm = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if gnorm < 1e-10 {
                break;
            }
            let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
            let mut accepted = false;
            while damping < 1e12 {
                let mut hd = h.clone();
                for i in 0..len {
                    let d = h.diag(i);
                    hd.add_diag(i, damping * (d + 1e-6));
                }
                let Some(mut step) = hd.solve(&rhs) else {
                    damping *= 10.0;
                    continue;
                };
                for i in 0..len {
                    trial[i] = z[i] + step[i];
                }
                self.project(&mut trial);
                for i in 0..len {
                    step[i] = trial[i] - z[i];
                }
                let next = self.merit(&trial, lam, mu, None);
                let predicted = -(grad.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>() + 0.5 * h.quad(&step));
                if next < phi && next.is_finite() {
                    let actual = phi - next;
                    let ratio = if predicted > 0.0 { actual / predicted } else { 1.0 };
                    damping = if ratio > 0.75 {
                        (damping / 3.0).max(1e-12)
                    } else if ratio < 0.25 {
                        damping * 2.0
                    } else {
                        damping
                    };
                    std::mem::swap(z, &mut trial);
                    let step_norm = step.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    let converged = actual <= 1e-15 * phi.abs().max(1.0) && step_norm < 1e-10;
                    phi = self.merit(z, lam, mu, Some((&mut grad, &mut h)));
                    accepted = !converged;
                    break;
                }
                damping *= 10.0;
            }
            if !accepted {
                break;
            }
        }
        Ok(())
    }

    /// Clamps controls and the timestep into their boxes.
    fn project(&self, z: &mut [f64]) {
        let cb = &self.p.model.control_bounds;
        for k in 0..self.lay.horizon - 1 {
            let o = self.lay.u(k);
            for c in 0..self.lay.m {
                z[o + c] = z[o + c].clamp(cb.lo[c], cb.hi[c]);
            }
        }
        let (lo, hi) = self.p.model.dt_bounds;
        let i = self.lay.dt();
        z[i] = z[i].clamp(lo, hi);
    }

    fn unpack(&self, z: &[f64]) -> Trajectory {
        let t = self.lay.horizon;
        Trajectory {
            states: (0..t).map(|k| State(self.state(z, k).to_vec())).collect(),
            controls: (0..t - 1).map(|k| Control(self.control(z, k).to_vec())).collect(),
            dt: z[self.lay.dt()],
        }
    }

    /// Clamps controls and timestep into their boxes and re-integrates from the start so
    /// the result is dynamically exact, then checks every constraint on the result.
    fn polish(&self, z: &[f64]) -> Result<Trajectory, f64> {
        let model = self.p.model;
        let (lo, hi) = model.dt_bounds;
        let dt = z[self.lay.dt()].clamp(lo, hi);
        let controls: Vec<Control> = (0..self.lay.horizon - 1)
            .map(|k| {
                let mut u = Control(self.control(z, k).to_vec());
                model.control_bounds.clamp(&mut u);
                u
            })
            .collect();
        let traj = Trajectory::rollout(model, self.p.start.clone(), controls, dt).map_err(|_| f64::INFINITY)?;
        let mut worst: f64 = 0.0;
        worst = worst.max(state_distance(model, traj.last(), &self.p.goal) - self.p.alpha);
        for x in &traj.states[1..] {
            let c = clearance(&model.body, &self.pose(x), self.p.workspace);
            worst = worst.max(self.params.clearance_margin - self.params.eps_con - c);
            if c <= 0.0 {
                worst = worst.max(1e-3);
            }
            if !model.velocity_ok(x, 0.0) {
                worst = worst.max(1e-3);
            }
            let p = position(model, x);
            for q in &self.p.fixed {
                worst = worst.max(self.p.fixed_distance - self.params.separation_margin - distance3(&p, q));
            }
        }
        if let Some(obs) = &self.p.moving {
            let tl = Timeline::of_trajectory(model, &traj, obs.t0);
            for other in &obs.timelines {
                if let Some((_, _, _, d)) = pair_conflict(&tl, other, obs.d_min, obs.t0) {
                    worst = worst.max(obs.d_min - d);
                }
            }
        }
        if worst > 0.0 {
            Err(worst)
        } else {
            Ok(traj)
        }
    }

    fn solve(&self, sink: &mut dyn FnMut(IterateRecord), deadline: Option<Instant>) -> Result<Optimized, OptimizeError> {
        let p = self.p;
        let mut z = self.pack(&p.init_states, &p.init_controls, p.init_dt);
        self.project(&mut z);
        let mut lam = Multipliers {
            fixed: vec![0.0; self.n_static],
            pairs: self.moving_pairs(&z),
            moving: vec![],
        };
        lam.moving = vec![0.0; lam.pairs.len()];
        let mut mu = self.params.mu0;
        let eq_tol = 0.01 * self.params.eps_dyn;
        let mut accepted: Option<(Vec<f64>, f64, f64)> = None;
        let mut best_violation = f64::INFINITY;
        let mut outer = 0;
        let mut attempts = 0;
        while outer < self.params.max_outer && attempts < 3 * self.params.max_outer {
            attempts += 1;
            let saved = z.clone();
            self.inner(&mut z, &lam, mu, deadline)?;
            let (eq, ineq, fixed, moving) = self.violations(&z, &lam, Some(mu));
            let violation = eq.max(ineq);
            let cost = self.cost(&z);
            if let Some((_, prev_violation, _)) = &accepted {
                if violation > *prev_violation && mu < self.params.mu_max {
                    // Keep accepted iterates monotone: retry from the last one, stiffer.
                    z = saved;
                    mu = (mu * self.params.mu_growth).min(self.params.mu_max);
                    continue;
                }
            }
            outer += 1;
            sink(IterateRecord {
                iteration: outer,
                cost,
                max_violation: violation,
                mu,
            });
            best_violation = best_violation.min(violation);
            let feasible = eq <= eq_tol && ineq <= self.params.eps_con;
            let settled = accepted
                .as_ref()
                .is_some_and(|(_, _, c)| (c - cost).abs() <= self.params.cost_tol * cost.abs().max(1.0));
            let prev_violation = accepted.as_ref().map_or(f64::INFINITY, |a| a.1);
            accepted = Some((z.clone(), violation, cost));
            if feasible && (settled || outer >= self.params.max_outer) {
                break;
            }
            if feasible {
                if let Ok(traj) = self.polish(&z) {
                    if settled {
                        let cost = traj.cost(p.model, self.params.beta1);
                        return Ok(Optimized {
                            trajectory: traj,
                            cost,
                            outer_iterations: outer,
                        });
                    }
                }
            }
            lam.fixed = fixed;
            lam.moving = moving;
            if violation > 0.25 * prev_violation {
                mu = (mu * self.params.mu_growth).min(self.params.mu_max);
            }
            // The time-aligned pair set follows the timestep.
            let pairs = self.moving_pairs(&z);
            if pairs != lam.pairs {
                let old: HashMap<Pair, f64> = lam.pairs.iter().copied().zip(lam.moving.iter().copied()).collect();
                lam.moving = pairs.iter().map(|k| old.get(k).copied().unwrap_or(0.0)).collect();
                lam.pairs = pairs;
            }
        }
        let (z, violation, _) = accepted.unwrap_or((z, f64::INFINITY, 0.0));
        let (eq, ineq, _, _) = self.violations(&z, &lam, None);
        if eq <= eq_tol && ineq <= self.params.eps_con {
            match self.polish(&z) {
                Ok(traj) => {
                    let cost = traj.cost(p.model, self.params.beta1);
                    return Ok(Optimized {
                        trajectory: traj,
                        cost,
                        outer_iterations: outer,
                    });
                }
                Err(v) => {
                    return Err(OptimizeError::NotConverged {
                        robot: None,
                        violation: v,
                        best: Box::new(self.unpack(&z)),
                    })
                }
            }
        }
        Err(OptimizeError::NotConverged {
            robot: None,
            violation: violation.min(best_violation),
            best: Box::new(self.unpack(&z)),
        })
    }
}

pub fn optimize_single(problem: &TranscriptionProblem, params: &OptimizerParams) -> Result<Optimized, OptimizeError> {
    optimize_single_logged(problem, params, &mut |_| {}, None)
}

/// Like [`optimize_single`], reporting every accepted outer iterate to `sink`.
pub fn optimize_single_logged(
    problem: &TranscriptionProblem,
    params: &OptimizerParams,
    sink: &mut dyn FnMut(IterateRecord),
    deadline: Option<Instant>,
) -> Result<Optimized, OptimizeError> {
    if problem.horizon < 2 {
        return Err(OptimizeError::InvalidInput("horizon must be at least 2".into()));
    }
    if problem.init_states.len() != problem.horizon || problem.init_controls.len() + 1 != problem.horizon {
        return Err(OptimizeError::InvalidInput("initial guess does not match the horizon".into()));
    }
    Solver::new(problem, params).solve(sink, deadline)
}

/// Optimizes robots one after another in `order`. Each robot keeps every knot at least
/// `d_min` (plus margin) from every knot of the robots before it and from the starts of
/// the robots after it, and stays time-aligned clear of `obstacles`.
#[allow(clippy::too_many_arguments)]
pub fn optimize_prioritized(
    models: &[&RobotModel],
    workspace: &Workspace,
    queries: &[Query],
    references: &[KinematicPath],
    order: &[usize],
    d_min: f64,
    obstacles: &MovingObstacles,
    params: &OptimizerParams,
    deadline: Option<Instant>,
) -> Result<Vec<Trajectory>, OptimizeError> {
    let count = models.len();
    if queries.len() != count || references.len() != count || order.len() != count {
        return Err(OptimizeError::InvalidInput("one query, reference and priority per robot required".into()));
    }
    let mut out: Vec<Option<Trajectory>> = vec![None; count];
    let mut fixed: Vec<[f64; 3]> = vec![];
    for (rank, &r) in order.iter().enumerate() {
        // Robots not planned yet still sit at their starts.
        let waiting = order[rank + 1..].iter().map(|&o| position(models[o], &queries[o].start));
        let problem = transcribe(models[r], workspace, &queries[r], &references[r], params)
            .map_err(|e| e.for_robot(r))?
            .with_fixed(fixed.iter().copied().chain(waiting).collect(), d_min + params.separation_margin)
            .with_moving(obstacles.clone());
        let solved = optimize_single_logged(&problem, params, &mut |_| {}, deadline).map_err(|e| e.for_robot(r))?;
        fixed.extend(solved.trajectory.states.iter().map(|x| position(models[r], x)));
        out[r] = Some(solved.trajectory);
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

//! Robot models, the explicit Euler transition, and trajectory containers.
//!
//! State layouts:
//! - `unicycle1`: `[x, y, theta]`, controls `[v, omega]`
//! - `unicycle2`: `[x, y, theta, v, omega]`, controls `[a, alpha]`
//! - `quadrotor2`: `[x, y, z, roll, pitch, yaw, vx, vy, vz, roll_rate, pitch_rate, yaw_rate]`,
//!   controls `[thrust, tau_roll, tau_pitch, tau_yaw]`

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_diff, normalize_angle, ConvexPolytope, Dim, Pose};

/// Tolerance on control bound membership.
pub const CONTROL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("control component {index} = {value} outside [{lo}, {hi}]")]
    ControlOutOfBounds {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("timestep {0} must be positive and finite")]
    InvalidTimestep(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("malformed trajectory: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Unicycle1,
    Unicycle2,
    Quadrotor2,
}

impl ModelKind {
    pub fn state_dim(self) -> usize {
        match self {
            ModelKind::Unicycle1 => 3,
            ModelKind::Unicycle2 => 5,
            ModelKind::Quadrotor2 => 12,
        }
    }

    pub fn control_dim(self) -> usize {
        match self {
            ModelKind::Unicycle1 => 2,
            ModelKind::Unicycle2 => 2,
            ModelKind::Quadrotor2 => 4,
        }
    }

    /// State indices holding periodic angles.
    pub fn angle_indices(self) -> &'static [usize] {
        match self {
            ModelKind::Unicycle1 | ModelKind::Unicycle2 => &[2],
            ModelKind::Quadrotor2 => &[3, 4, 5],
        }
    }

    /// State indices constrained by the velocity bounds box, in box order.
    pub fn velocity_indices(self) -> &'static [usize] {
        match self {
            ModelKind::Unicycle1 => &[],
            ModelKind::Unicycle2 => &[3, 4],
            ModelKind::Quadrotor2 => &[6, 7, 8, 9, 10, 11],
        }
    }

    pub fn workspace_dim(self) -> Dim {
        match self {
            ModelKind::Quadrotor2 => Dim::Spatial,
            _ => Dim::Planar,
        }
    }

    /// Number of leading state components that form the configuration.
    pub fn config_dim(self) -> usize {
        match self {
            ModelKind::Quadrotor2 => 6,
            _ => 3,
        }
    }

    pub fn position_dim(self) -> usize {
        self.workspace_dim().count()
    }

    pub fn is_angle(self, i: usize) -> bool {
        self.angle_indices().contains(&i)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Unicycle1 => "unicycle1",
            ModelKind::Unicycle2 => "unicycle2",
            ModelKind::Quadrotor2 => "quadrotor2",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unicycle1" => Ok(ModelKind::Unicycle1),
            "unicycle2" => Ok(ModelKind::Unicycle2),
            "quadrotor2" | "quadrotor" => Ok(ModelKind::Quadrotor2),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// Componentwise box `lo <= v <= hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn symmetric(half: &[f64]) -> Self {
        Self {
            lo: half.iter().map(|h| -h).collect(),
            hi: half.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        v.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (lo, hi))| *x >= lo - tol && *x <= hi + tol)
    }

    /// Largest amount by which any component leaves the box.
    pub fn excess(&self, v: &[f64]) -> f64 {
        v.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (lo, hi))| (lo - x).max(x - hi).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn clamp(&self, v: &mut [f64]) {
        for (x, (lo, hi)) in v.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = x.clamp(*lo, *hi);
        }
    }

    fn is_valid(&self) -> bool {
        self.lo.len() == self.hi.len()
            && self
                .lo
                .iter()
                .zip(&self.hi)
                .all(|(l, h)| l.is_finite() && h.is_finite() && l <= h)
    }
}

macro_rules! vector_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<f64>);

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }

        impl From<&[f64]> for $name {
            fn from(v: &[f64]) -> Self {
                Self(v.to_vec())
            }
        }
    };
}

vector_newtype!(
    /// A robot's dynamic state.
    State
);
vector_newtype!(
    /// A robot's control input, held constant over one timestep.
    Control
);

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub kind: ModelKind,
    pub control_bounds: BoxBounds,
    /// Bounds on the state's velocity components, see [`ModelKind::velocity_indices`].
    pub velocity_bounds: Option<BoxBounds>,
    pub body: ConvexPolytope,
    pub mass: f64,
    /// Diagonal of the inertia tensor.
    pub inertia: [f64; 3],
    pub gravity: f64,
    pub dt_bounds: (f64, f64),
}

impl RobotModel {
    pub fn unicycle1() -> Self {
        Self {
            kind: ModelKind::Unicycle1,
            control_bounds: BoxBounds::symmetric(&[2.0, 2.0]),
            velocity_bounds: None,
            body: ConvexPolytope::rectangle(0.3, 0.3).expect("static body"),
            mass: 1.0,
            inertia: [0.01; 3],
            gravity: 9.81,
            dt_bounds: (0.05, 0.5),
        }
    }

    pub fn unicycle2() -> Self {
        Self {
            kind: ModelKind::Unicycle2,
            control_bounds: BoxBounds::symmetric(&[1.0, 1.0]),
            velocity_bounds: Some(BoxBounds::symmetric(&[2.0, 2.0])),
            ..Self::unicycle1()
        }
    }

    pub fn quadrotor2() -> Self {
        Self {
            kind: ModelKind::Quadrotor2,
            control_bounds: BoxBounds::new(vec![0.0, -0.5, -0.5, -0.5], vec![20.0, 0.5, 0.5, 0.5]),
            velocity_bounds: Some(BoxBounds::symmetric(&[2.0, 2.0, 2.0, 4.0, 4.0, 4.0])),
            body: ConvexPolytope::cuboid(0.3, 0.3, 0.1).expect("static body"),
            mass: 1.0,
            inertia: [0.01; 3],
            gravity: 9.81,
            dt_bounds: (0.05, 0.5),
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Unicycle1 => Self::unicycle1(),
            ModelKind::Unicycle2 => Self::unicycle2(),
            ModelKind::Quadrotor2 => Self::quadrotor2(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let k = self.kind;
        if self.control_bounds.dim() != k.control_dim() || !self.control_bounds.is_valid() {
            return Err(ModelError::InvalidModel("control bounds".into()));
        }
        if let Some(vb) = &self.velocity_bounds {
            if vb.dim() != k.velocity_indices().len() || !vb.is_valid() {
                return Err(ModelError::InvalidModel("velocity bounds".into()));
            }
        }
        let (lo, hi) = self.dt_bounds;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(ModelError::InvalidModel("timestep bounds".into()));
        }
        if self.body.dim() != k.workspace_dim() {
            return Err(ModelError::InvalidModel("body dimension".into()));
        }
        if k == ModelKind::Quadrotor2
            && !(self.mass > 0.0 && self.inertia.iter().all(|i| *i > 0.0) && self.gravity >= 0.0)
        {
            return Err(ModelError::InvalidModel("mass properties".into()));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.kind.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.kind.control_dim()
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }

    /// The control the cost penalizes deviation from: zero for the unicycles, hover for
    /// the quadrotor.
    pub fn reference_control(&self) -> Control {
        match self.kind {
            ModelKind::Quadrotor2 => Control(vec![self.hover_thrust(), 0.0, 0.0, 0.0]),
            k => Control(vec![0.0; k.control_dim()]),
        }
    }

    /// A rest state at the given configuration (all velocities zero).
    pub fn rest_state(&self, pose: &Pose) -> State {
        let mut x = vec![0.0; self.state_dim()];
        let t = pose.translation;
        match self.kind {
            ModelKind::Quadrotor2 => {
                x[..3].copy_from_slice(&[t.x, t.y, t.z]);
                x[3..6].copy_from_slice(&[pose.roll, pose.pitch, pose.yaw]);
            }
            _ => x[..3].copy_from_slice(&[t.x, t.y, pose.yaw]),
        }
        State(x)
    }

    pub fn velocity_ok(&self, x: &[f64], tol: f64) -> bool {
        match &self.velocity_bounds {
            None => true,
            Some(vb) => self
                .kind
                .velocity_indices()
                .iter()
                .zip(vb.lo.iter().zip(&vb.hi))
                .all(|(&i, (lo, hi))| x[i] >= lo - tol && x[i] <= hi + tol),
        }
    }

    fn check_dims(&self, x: &[f64], u: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.state_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "state",
                expected: self.state_dim(),
                got: x.len(),
            });
        }
        if u.len() != self.control_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "control",
                expected: self.control_dim(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// `f(x, u)` without dimension checks.
    pub fn derivative_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        match self.kind {
            ModelKind::Unicycle1 => {
                let (s, c) = x[2].sin_cos();
                out[0] = u[0] * c;
                out[1] = u[0] * s;
                out[2] = u[1];
            }
            ModelKind::Unicycle2 => {
                let (s, c) = x[2].sin_cos();
                out[0] = x[3] * c;
                out[1] = x[3] * s;
                out[2] = x[4];
                out[3] = u[0];
                out[4] = u[1];
            }
            ModelKind::Quadrotor2 => {
                out[..6].copy_from_slice(&x[6..12]);
                let r = thrust_direction(x[3], x[4], x[5]);
                let a = u[0] / self.mass;
                out[6] = a * r[0];
                out[7] = a * r[1];
                out[8] = a * r[2] - self.gravity;
                out[9] = u[1] / self.inertia[0];
                out[10] = u[2] / self.inertia[1];
                out[11] = u[3] / self.inertia[2];
            }
        }
    }

    /// Analytic `(df/dx, df/du)` in row-major order.
    pub fn jacobians(&self, x: &[f64], u: &[f64]) -> Jacobians {
        let n = self.state_dim();
        let m = self.control_dim();
        let mut j = Jacobians {
            n,
            m,
            df_dx: vec![0.0; n * n],
            df_du: vec![0.0; n * m],
        };
        match self.kind {
            ModelKind::Unicycle1 => {
                let (s, c) = x[2].sin_cos();
                j.set_x(0, 2, -u[0] * s);
                j.set_x(1, 2, u[0] * c);
                j.set_u(0, 0, c);
                j.set_u(1, 0, s);
                j.set_u(2, 1, 1.0);
            }
            ModelKind::Unicycle2 => {
                let (s, c) = x[2].sin_cos();
                j.set_x(0, 2, -x[3] * s);
                j.set_x(0, 3, c);
                j.set_x(1, 2, x[3] * c);
                j.set_x(1, 3, s);
                j.set_x(2, 4, 1.0);
                j.set_u(3, 0, 1.0);
                j.set_u(4, 1, 1.0);
            }
            ModelKind::Quadrotor2 => {
                for i in 0..6 {
                    j.set_x(i, i + 6, 1.0);
                }
                let (sf, cf) = x[3].sin_cos();
                let (st, ct) = x[4].sin_cos();
                let (sp, cp) = x[5].sin_cos();
                let a = u[0] / self.mass;
                let d = [
                    [-sf * st * cp + cf * sp, cf * ct * cp, -cf * st * sp + sf * cp],
                    [-sf * st * sp - cf * cp, cf * ct * sp, cf * st * cp + sf * sp],
                    [-sf * ct, -cf * st, 0.0],
                ];
                let r = thrust_direction(x[3], x[4], x[5]);
                for row in 0..3 {
                    for col in 0..3 {
                        j.set_x(6 + row, 3 + col, a * d[row][col]);
                    }
                    j.set_u(6 + row, 0, r[row] / self.mass);
                    j.set_u(9 + row, 1 + row, 1.0 / self.inertia[row]);
                }
            }
        }
        j
    }
}

/// Body z-axis in the world frame for roll/pitch/yaw `(phi, theta, psi)`.
pub fn thrust_direction(phi: f64, theta: f64, psi: f64) -> [f64; 3] {
    let (sf, cf) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    [cf * st * cp + sf * sp, cf * st * sp - sf * cp, cf * ct]
}

#[derive(Debug, Clone)]
pub struct Jacobians {
    pub n: usize,
    pub m: usize,
    pub df_dx: Vec<f64>,
    pub df_du: Vec<f64>,
}

impl Jacobians {
    fn set_x(&mut self, r: usize, c: usize, v: f64) {
        self.df_dx[r * self.n + c] = v;
    }

    fn set_u(&mut self, r: usize, c: usize, v: f64) {
        self.df_du[r * self.m + c] = v;
    }

    pub fn dx(&self, r: usize, c: usize) -> f64 {
        self.df_dx[r * self.n + c]
    }

    pub fn du(&self, r: usize, c: usize) -> f64 {
        self.df_du[r * self.m + c]
    }
}

pub fn derivative(model: &RobotModel, x: &[f64], u: &[f64]) -> Result<Vec<f64>, ModelError> {
    model.check_dims(x, u)?;
    let mut out = vec![0.0; model.state_dim()];
    model.derivative_into(x, u, &mut out);
    Ok(out)
}

/// One Euler step `x + f(x, u) dt` with angles wrapped, without bounds checks.
pub fn euler_step(model: &RobotModel, x: &[f64], u: &[f64], dt: f64) -> State {
    let mut out = vec![0.0; x.len()];
    model.derivative_into(x, u, &mut out);
    for (o, xi) in out.iter_mut().zip(x) {
        *o = xi + *o * dt;
    }
    for &i in model.kind.angle_indices() {
        out[i] = normalize_angle(out[i]);
    }
    State(out)
}

pub fn step(model: &RobotModel, x: &[f64], u: &[f64], dt: f64) -> Result<State, ModelError> {
    model.check_dims(x, u)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ModelError::InvalidTimestep(dt));
    }
    let b = &model.control_bounds;
    for (i, v) in u.iter().enumerate() {
        if !(*v >= b.lo[i] - CONTROL_TOL && *v <= b.hi[i] + CONTROL_TOL) {
            return Err(ModelError::ControlOutOfBounds {
                index: i,
                value: *v,
                lo: b.lo[i],
                hi: b.hi[i],
            });
        }
    }
    Ok(euler_step(model, x, u, dt))
}

/// `a - b` with angle components wrapped.
pub fn state_difference(model: &RobotModel, a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            if model.kind.is_angle(i) {
                angle_diff(*x, *y)
            } else {
                x - y
            }
        })
        .collect()
}

/// Euclidean state distance with angle wrap, the goal-region metric.
pub fn state_distance(model: &RobotModel, a: &[f64], b: &[f64]) -> f64 {
    state_difference(model, a, b)
        .iter()
        .map(|d| d * d)
        .sum::<f64>()
        .sqrt()
}

pub fn extract_configuration(model: &RobotModel, x: &[f64]) -> Pose {
    match model.kind {
        ModelKind::Quadrotor2 => Pose::spatial(x[0], x[1], x[2], x[3], x[4], x[5]),
        _ => Pose::planar(x[0], x[1], x[2]),
    }
}

/// Position components of a state as a 3-vector (`z = 0` for planar models).
pub fn position(model: &RobotModel, x: &[f64]) -> [f64; 3] {
    match model.kind {
        ModelKind::Quadrotor2 => [x[0], x[1], x[2]],
        _ => [x[0], x[1], 0.0],
    }
}

/// Per-transition defect `max_k |x_{k+1} - step(x_k, u_k)|_inf`, angles compared on the circle.
pub fn transition_defect(model: &RobotModel, x: &[f64], u: &[f64], next: &[f64], dt: f64) -> f64 {
    let predicted = euler_step(model, x, u, dt);
    state_difference(model, next, &predicted)
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
}

pub fn feasibility_residual(model: &RobotModel, traj: &Trajectory) -> f64 {
    traj.states
        .windows(2)
        .zip(&traj.controls)
        .map(|(w, u)| transition_defect(model, &w[0], u, &w[1], traj.dt))
        .fold(0.0, f64::max)
}

/// States `x_1..x_T`, controls `u_1..u_{T-1}` and a single timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub controls: Vec<Control>,
    pub dt: f64,
}

impl Trajectory {
    pub fn new(states: Vec<State>, controls: Vec<Control>, dt: f64) -> Result<Self, ModelError> {
        if states.is_empty() {
            return Err(ModelError::Shape("no states".into()));
        }
        if controls.len() + 1 != states.len() {
            return Err(ModelError::Shape(format!(
                "{} states but {} controls",
                states.len(),
                controls.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ModelError::InvalidTimestep(dt));
        }
        Ok(Self {
            states,
            controls,
            dt,
        })
    }

    /// A single-state trajectory.
    pub fn stationary(state: State, dt: f64) -> Self {
        Self {
            states: vec![state],
            controls: vec![],
            dt,
        }
    }

    /// Rolls out `controls` from `start` with [`step`].
    pub fn rollout(
        model: &RobotModel,
        start: State,
        controls: Vec<Control>,
        dt: f64,
    ) -> Result<Self, ModelError> {
        let mut states = Vec::with_capacity(controls.len() + 1);
        states.push(start);
        for u in &controls {
            let next = step(model, states.last().unwrap(), u, dt)?;
            states.push(next);
        }
        Trajectory::new(states, controls, dt)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn duration(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.dt
    }

    /// `sum_k (beta1 |u_k - u_ref|^2 + dt)` over the transitions.
    pub fn cost(&self, model: &RobotModel, beta1: f64) -> f64 {
        let uref = model.reference_control();
        self.controls
            .iter()
            .map(|u| {
                let e: f64 = u.iter().zip(uref.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                beta1 * e + self.dt
            })
            .sum()
    }
}

/// Consecutive trajectory pieces that share junction states; each piece keeps its own
/// timestep.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StitchedTrajectory {
    pub pieces: Vec<Trajectory>,
}

impl StitchedTrajectory {
    pub fn new(first: Trajectory) -> Self {
        Self {
            pieces: vec![first],
        }
    }

    pub fn push(&mut self, piece: Trajectory) {
        self.pieces.push(piece);
    }

    pub fn num_states(&self) -> usize {
        match self.pieces.len() {
            0 => 0,
            _ => 1 + self.pieces.iter().map(|p| p.len() - 1).sum::<usize>(),
        }
    }

    pub fn first(&self) -> &State {
        self.pieces[0].first()
    }

    pub fn last(&self) -> &State {
        self.pieces.last().expect("non-empty").last()
    }

    pub fn duration(&self) -> f64 {
        self.knot_times().last().copied().unwrap_or(0.0)
    }

    /// Global knot states with junctions counted once.
    pub fn states(&self) -> Vec<&State> {
        let mut out = Vec::with_capacity(self.num_states());
        for (p, piece) in self.pieces.iter().enumerate() {
            let skip = usize::from(p > 0);
            out.extend(piece.states.iter().skip(skip));
        }
        out
    }

    /// Knot times, accumulated piece by piece from zero.
    pub fn knot_times(&self) -> Vec<f64> {
        let mut times = Vec::with_capacity(self.num_states());
        let mut t = 0.0;
        for (p, piece) in self.pieces.iter().enumerate() {
            if p == 0 {
                times.push(t);
            }
            for _ in 1..piece.len() {
                t += piece.dt;
                times.push(t);
            }
        }
        times
    }

    /// Every transition as `(global index of source state, state, control, next, dt)`.
    pub fn transitions(&self) -> Vec<(usize, &State, &Control, &State, f64)> {
        let mut out = Vec::new();
        let mut base = 0;
        for piece in &self.pieces {
            for (k, u) in piece.controls.iter().enumerate() {
                out.push((base + k, &piece.states[k], u, &piece.states[k + 1], piece.dt));
            }
            base += piece.len() - 1;
        }
        out
    }

    /// Transitions times timestep, summed over pieces.
    pub fn path_cost(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration()).sum()
    }
}

/// Gains of the quadrotor hover/velocity controller, scaled to the control period.
fn attitude_gains(dt: f64) -> (f64, f64) {
    // Discrete double integrator with a double pole at 0.6.
    (0.16 / (dt * dt), 0.8 / dt)
}

const QUAD_KV: f64 = 1.5;

/// Feedback control tracking a world-frame velocity setpoint at constant yaw.
pub fn quadrotor_velocity_control(model: &RobotModel, x: &[f64], v_des: [f64; 3], yaw_des: f64, dt: f64) -> Control {
    const KV: f64 = QUAD_KV;
    const MAX_TILT: f64 = 0.4;
    let g = model.gravity;
    let mut acc = [
        KV * (v_des[0] - x[6]),
        KV * (v_des[1] - x[7]),
        KV * (v_des[2] - x[8]),
    ];
    let horiz = (acc[0] * acc[0] + acc[1] * acc[1]).sqrt();
    let max_h = g * MAX_TILT.tan();
    if horiz > max_h {
        acc[0] *= max_h / horiz;
        acc[1] *= max_h / horiz;
    }
    acc[2] = acc[2].clamp(-0.5 * g, 0.5 * g);
    let f = [acc[0], acc[1], acc[2] + g];
    let norm = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
    let d = [f[0] / norm, f[1] / norm, f[2] / norm];
    // Undo yaw, then solve r(phi, theta, 0) = (c_phi s_theta, -s_phi, c_phi c_theta).
    let (sp, cp) = x[5].sin_cos();
    let dx = cp * d[0] + sp * d[1];
    let dy = -sp * d[0] + cp * d[1];
    let phi_des = (-dy).clamp(-1.0, 1.0).asin().clamp(-MAX_TILT, MAX_TILT);
    let theta_des = dx.atan2(d[2]).clamp(-MAX_TILT, MAX_TILT);
    let r = thrust_direction(x[3], x[4], x[5]);
    let thrust = model.mass * (f[0] * r[0] + f[1] * r[1] + f[2] * r[2]);
    let (kp, kd) = attitude_gains(dt);
    let targets = [phi_des, theta_des, yaw_des];
    let mut u = vec![thrust, 0.0, 0.0, 0.0];
    for a in 0..3 {
        let err = angle_diff(targets[a], x[3 + a]);
        u[1 + a] = model.inertia[a] * (kp * err - kd * x[9 + a]);
    }
    let mut u = Control(u);
    model.control_bounds.clamp(&mut u);
    u
}

/// Speed that still allows stopping within `err` under deceleration `acc`.
fn braking_speed(err: f64, acc: f64, vmax: f64, dt: f64) -> f64 {
    err.signum() * (0.9 * (2.0 * acc * err.abs()).sqrt()).min(vmax).min(err.abs() / dt)
}

/// Pose-regulating feedback toward `target`. `unicycle1` uses a smooth law that
/// reverses through `cos(alpha)`; `unicycle2` turns, drives and turns again along
/// braking profiles that respect its acceleration bounds.
pub fn unicycle_steer_control(model: &RobotModel, x: &[f64], target: &[f64], dt: f64) -> Control {
    let (dx, dy) = (target[0] - x[0], target[1] - x[1]);
    let e = (dx * dx + dy * dy).sqrt();
    let mut u = match model.kind {
        ModelKind::Unicycle2 => {
            const POSITION_TOL: f64 = 0.05;
            let cb = &model.control_bounds;
            let (acc, alpha_max) = (cb.hi[0].min(-cb.lo[0]), cb.hi[1].min(-cb.lo[1]));
            let (v_lim, w_lim) = model
                .velocity_bounds
                .as_ref()
                .map_or((f64::INFINITY, f64::INFINITY), |b| (b.hi[0].min(-b.lo[0]), b.hi[1].min(-b.lo[1])));
            let (v, w) = if e > POSITION_TOL {
                let bearing = dy.atan2(dx);
                let (mut dir, mut heading) = (1.0, bearing);
                if angle_diff(bearing, x[2]).abs() > std::f64::consts::FRAC_PI_2 && e < 1.0 {
                    dir = -1.0;
                    heading = bearing + std::f64::consts::PI;
                }
                let d = angle_diff(heading, x[2]);
                if d.abs() > 0.3 || (d.abs() > 0.05 && x[3].abs() < 0.05) {
                    (0.0, braking_speed(d, alpha_max, w_lim, dt))
                } else {
                    (dir * braking_speed(e * d.cos(), acc, v_lim, dt), 2.0 * d)
                }
            } else {
                (0.0, braking_speed(angle_diff(target[2], x[2]), alpha_max, w_lim, dt))
            };
            Control(vec![(v - x[3]) / dt, (w - x[4]) / dt])
        }
        _ => {
            const GAMMA: f64 = 2.0;
            const K: f64 = 4.0;
            const H: f64 = 1.0;
            if e < 1e-6 {
                Control(vec![0.0, K * angle_diff(target[2], x[2])])
            } else {
                let bearing = dy.atan2(dx);
                let theta = angle_diff(bearing, target[2]);
                let alpha = angle_diff(bearing, x[2]);
                let sinc = if alpha.abs() < 1e-9 { 1.0 } else { alpha.sin() / alpha };
                let c = GAMMA * alpha.cos();
                Control(vec![c * e, K * alpha + c * sinc * (alpha + H * theta)])
            }
        }
    };
    model.control_bounds.clamp(&mut u);
    u
}

/// Control that keeps a robot in place: zero for `unicycle1`, clipped braking for
/// `unicycle2`, and a hover controller pinned to `anchor` for the quadrotor.
pub fn hold_control(model: &RobotModel, x: &[f64], anchor: &[f64], dt: f64) -> Control {
    let mut u = match model.kind {
        ModelKind::Unicycle1 => Control(vec![0.0, 0.0]),
        ModelKind::Unicycle2 => Control(vec![-x[3] / dt, -x[4] / dt]),
        ModelKind::Quadrotor2 => {
            const KP: f64 = 0.5;
            // Thrust acts on altitude without attitude lag, so the vertical axis gets a
            // stiff critically damped law; floors and ceilings are usually closest.
            let kd = (1.0 / dt).min(6.0);
            let az = kd * kd / 4.0 * (anchor[2] - x[2]) - kd * x[8];
            let v_des = [
                KP * (anchor[0] - x[0]),
                KP * (anchor[1] - x[1]),
                x[8] + az / QUAD_KV,
            ];
            quadrotor_velocity_control(model, x, v_des, anchor[5], dt)
        }
    };
    model.control_bounds.clamp(&mut u);
    u
}

/// Rolls out [`hold_control`] from `start` for `steps` transitions.
pub fn hold_rollout(model: &RobotModel, start: &State, steps: usize, dt: f64) -> Trajectory {
    let mut states = vec![start.clone()];
    let mut controls = Vec::with_capacity(steps);
    for _ in 0..steps {
        let x = states.last().unwrap();
        let u = hold_control(model, x, start, dt);
        let next = euler_step(model, x, &u, dt);
        controls.push(u);
        states.push(next);
    }
    Trajectory {
        states,
        controls,
        dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unicycle1_derivative_examples() {
        let m = RobotModel::unicycle1();
        assert_eq!(derivative(&m, &[0.0, 0.0, 0.0], &[1.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let d = derivative(&m, &[0.0, 0.0, PI / 2.0], &[1.0, 0.0]).unwrap();
        assert!(d[0].abs() < 1e-15 && (d[1] - 1.0).abs() < 1e-15 && d[2] == 0.0);
    }

    #[test]
    fn quadrotor_hover_is_a_fixed_point() {
        let m = RobotModel::quadrotor2();
        let mut x = vec![0.0; 12];
        x[..3].copy_from_slice(&[1.0, -2.0, 0.7]);
        let d = derivative(&m, &x, &[m.hover_thrust(), 0.0, 0.0, 0.0]).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12), "{d:?}");
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = RobotModel::unicycle2();
        assert!(matches!(
            derivative(&m, &[0.0; 3], &[0.0; 2]),
            Err(ModelError::DimensionMismatch { what: "state", .. })
        ));
    }

    #[test]
    fn step_examples() {
        let m1 = RobotModel::unicycle1();
        assert_eq!(step(&m1, &[0.0; 3], &[1.0, 0.0], 0.1).unwrap().0, vec![0.1, 0.0, 0.0]);
        assert_eq!(step(&m1, &[0.0; 3], &[0.0, 1.0], 0.1).unwrap().0, vec![0.0, 0.0, 0.1]);
        let m2 = RobotModel::unicycle2();
        let x = step(&m2, &[0.0, 0.0, 0.0, 1.0, 0.0], &[0.5, 0.0], 0.1).unwrap();
        let expected = [0.1, 0.0, 0.0, 1.05, 0.0];
        for (a, b) in x.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn step_rejects_out_of_bounds_controls() {
        let m = RobotModel::unicycle1();
        assert!(matches!(
            step(&m, &[0.0; 3], &[2.5, 0.0], 0.1),
            Err(ModelError::ControlOutOfBounds { index: 0, .. })
        ));
        assert!(matches!(step(&m, &[0.0; 3], &[0.0, 0.0], 0.0), Err(ModelError::InvalidTimestep(_))));
    }

    #[test]
    fn step_wraps_heading() {
        let m = RobotModel::unicycle1();
        let x = step(&m, &[0.0, 0.0, PI - 0.05], &[0.0, 1.0], 0.1).unwrap();
        assert!((x[2] - (-PI + 0.05)).abs() < 1e-12);
    }

    #[test]
    fn residual_examples() {
        let m = RobotModel::unicycle2();
        let controls: Vec<Control> = (0..8).map(|k| Control(vec![0.1 * k as f64 - 0.3, 0.2])).collect();
        let mut traj = Trajectory::rollout(&m, State(vec![0.0, 0.0, 0.3, 0.5, 0.0]), controls, 0.1).unwrap();
        assert_eq!(feasibility_residual(&m, &traj), 0.0);
        traj.states[5][1] += 0.01;
        assert!((feasibility_residual(&m, &traj) - 0.01).abs() < 1e-12);
        let single = Trajectory::stationary(State(vec![0.0; 5]), 0.1);
        assert_eq!(feasibility_residual(&m, &single), 0.0);
    }

    #[test]
    fn configuration_extraction() {
        let m2 = RobotModel::unicycle2();
        let p = extract_configuration(&m2, &[1.0, 2.0, 0.5, 3.0, 4.0]);
        assert_eq!((p.translation.x, p.translation.y, p.yaw), (1.0, 2.0, 0.5));
        let q = RobotModel::quadrotor2();
        let p = extract_configuration(&q, &[0.0; 12]);
        assert_eq!(p.rotation(), nalgebra::Matrix3::identity());
        let m1 = RobotModel::unicycle1();
        assert_eq!(extract_configuration(&m1, &[0.0, 0.0, -PI]).yaw, PI);
    }

    #[test]
    fn trajectory_shape_is_checked() {
        assert!(Trajectory::new(vec![], vec![], 0.1).is_err());
        assert!(Trajectory::new(vec![State(vec![0.0; 3])], vec![Control(vec![0.0; 2])], 0.1).is_err());
    }

    #[test]
    fn stitched_indexing() {
        let m = RobotModel::unicycle1();
        let a = Trajectory::rollout(&m, State(vec![0.0; 3]), vec![Control(vec![1.0, 0.0]); 3], 0.1).unwrap();
        let b = Trajectory::rollout(&m, a.last().clone(), vec![Control(vec![1.0, 0.0]); 2], 0.2).unwrap();
        let mut s = StitchedTrajectory::new(a);
        s.push(b);
        assert_eq!(s.num_states(), 6);
        assert_eq!(s.states().len(), 6);
        let t = s.knot_times();
        assert_eq!(t.len(), 6);
        assert!((t[5] - 0.7).abs() < 1e-12);
        assert!((s.path_cost() - 0.7).abs() < 1e-12);
        assert_eq!(s.transitions().len(), 5);
        assert_eq!(s.transitions()[3].0, 3);
    }

    #[test]
    fn quadrotor_hold_stays_put() {
        let m = RobotModel::quadrotor2();
        let mut x = vec![0.0; 12];
        x[2] = 1.0;
        x[6] = 0.3;
        x[3] = 0.05;
        for dt in [0.05, 0.1] {
            let traj = hold_rollout(&m, &State(x.clone()), (4.0 / dt) as usize, dt);
            let end = traj.last();
            let drift = ((end[0]).powi(2) + (end[1]).powi(2) + (end[2] - 1.0).powi(2)).sqrt();
            assert!(drift < 0.25, "dt {dt}: drift {drift}");
            assert!(end[6..].iter().all(|v| v.abs() < 0.1), "dt {dt}: {:?}", &end[6..]);
            assert!(traj.controls.iter().all(|u| m.control_bounds.contains(u, 0.0)));
        }
    }

    #[test]
    fn unicycle2_hold_brakes() {
        let m = RobotModel::unicycle2();
        let traj = hold_rollout(&m, &State(vec![0.0, 0.0, 0.0, 0.5, -0.2]), 20, 0.1);
        assert!(traj.last()[3].abs() < 1e-12 && traj.last()[4].abs() < 1e-12);
        assert!(traj.last()[0] < 0.2);
    }
}

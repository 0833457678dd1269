use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{expired, PlanError, Query};
use crate::dynamics::{
    euler_step, extract_configuration, hold_control, position, quadrotor_velocity_control,
    state_distance, unicycle_steer_control, Control, ModelKind, RobotModel, Trajectory,
};
use crate::geometry::{clearance, in_free_space, normalize_angle, Workspace};
use crate::timeline::{distance3, MovingObstacles, Timeline};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RrtParams {
    pub goal_bias: f64,
    /// Fixed timestep of every transition.
    pub dt: f64,
    /// An extension lasts between 1 and this many timesteps.
    pub max_steps: usize,
    /// Sampled extensions tried per iteration; the one ending nearest the sample wins.
    pub candidates: usize,
    pub single_budget: usize,
    pub composite_budget: usize,
    /// Added to `d_min` when checking separation.
    pub separation_margin: f64,
    /// Largest velocity setpoint sampled for quadrotor extensions.
    pub quad_speed: f64,
    /// Horizon of the steered goal connection tried on goal-biased iterations.
    pub connect_steps: usize,
    /// Clearance from static obstacles every tree state keeps, so that whoever plans
    /// onward from a tree state still has room to brake.
    pub clearance_margin: f64,
}

impl Default for RrtParams {
    fn default() -> Self {
        Self {
            goal_bias: 0.1,
            dt: 0.1,
            max_steps: 5,
            candidates: 8,
            single_budget: 20_000,
            composite_budget: 50_000,
            separation_margin: 0.01,
            quad_speed: 1.5,
            connect_steps: 60,
            clearance_margin: 0.02,
        }
    }
}

/// Quadrotor setpoints toward a target slow down linearly inside `vmax / APPROACH_GAIN`
/// so the attitude loop's lag does not carry the robot past it.
const APPROACH_GAIN: f64 = 0.5;

const TEAM_GOAL_MIX: f64 = 0.3;

/// Nodes other than the root whose extensions keep failing (typically moving too fast
/// toward a wall to stop) stop being selected as nearest neighbors.
const DEAD_AFTER: u8 = 3;

const BRAKE_STEPS: usize = 8;

fn weights(kind: ModelKind) -> &'static [f64] {
    match kind {
        ModelKind::Unicycle1 => &[1.0, 1.0, 0.5],
        ModelKind::Unicycle2 => &[1.0, 1.0, 0.5, 0.2, 0.2],
        ModelKind::Quadrotor2 => &[1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2],
    }
}

/// Nearest-neighbor metric: unit weight on positions, 0.5 on angles (wrapped) and 0.2
/// on velocities.
pub fn weighted_distance(model: &RobotModel, a: &[f64], b: &[f64]) -> f64 {
    weighted_sq(model.kind, a, b, f64::INFINITY).sqrt()
}

fn weighted_sq(kind: ModelKind, a: &[f64], b: &[f64], cap: f64) -> f64 {
    let w = weights(kind);
    let mut s = 0.0;
    for i in 0..a.len() {
        let mut d = a[i] - b[i];
        if kind.is_angle(i) {
            d = normalize_angle(d);
        }
        s += (w[i] * d).powi(2);
        if s > cap {
            return s;
        }
    }
    s
}

enum Policy {
    Hold(Vec<f64>),
    Steer(Vec<f64>),
    Constant(Control),
    Velocity([f64; 3]),
}

struct Node {
    state: Vec<f64>,
    parent: usize,
    /// Joint controls of every step of the incoming extension.
    controls: Vec<f64>,
    time: f64,
    /// Robots parked in their goal region; they only hold from here on.
    arrived: Vec<bool>,
}

struct Team<'a> {
    ws: &'a Workspace,
    models: Vec<&'a RobotModel>,
    queries: Vec<&'a Query>,
    obstacles: &'a MovingObstacles,
    separation: f64,
    params: &'a RrtParams,
    soff: Vec<usize>,
    coff: Vec<usize>,
}

impl<'a> Team<'a> {
    fn new(
        ws: &'a Workspace,
        models: Vec<&'a RobotModel>,
        queries: Vec<&'a Query>,
        obstacles: &'a MovingObstacles,
        separation: f64,
        params: &'a RrtParams,
    ) -> Result<Self, PlanError> {
        if models.len() != queries.len() || models.is_empty() {
            return Err(PlanError::InvalidInput("one query per robot required".into()));
        }
        let mut soff = vec![0];
        let mut coff = vec![0];
        for (m, q) in models.iter().zip(&queries) {
            if q.start.len() != m.state_dim() || q.goal.len() != m.state_dim() {
                return Err(PlanError::InvalidInput("query dimension mismatch".into()));
            }
            if !(q.alpha > 0.0) {
                return Err(PlanError::InvalidInput("alpha must be positive".into()));
            }
            if m.kind.workspace_dim() != ws.dim() {
                return Err(PlanError::InvalidInput("model and workspace dimensions differ".into()));
            }
            soff.push(soff.last().unwrap() + m.state_dim());
            coff.push(coff.last().unwrap() + m.control_dim());
        }
        Ok(Self {
            ws,
            models,
            queries,
            obstacles,
            separation,
            params,
            soff,
            coff,
        })
    }

    fn len(&self) -> usize {
        self.models.len()
    }

    fn slice<'s>(&self, x: &'s [f64], r: usize) -> &'s [f64] {
        &x[self.soff[r]..self.soff[r + 1]]
    }

    fn root(&self) -> Result<Vec<f64>, PlanError> {
        let mut x = Vec::with_capacity(*self.soff.last().unwrap());
        for (r, q) in self.queries.iter().enumerate() {
            let m = self.models[r];
            if !in_free_space(&m.body, &extract_configuration(m, &q.start), self.ws) {
                return Err(PlanError::InvalidInput(format!("robot {r} starts in collision")));
            }
            x.extend_from_slice(&q.start);
        }
        Ok(x)
    }

    fn at_goal(&self, r: usize, x: &[f64]) -> bool {
        let q = self.queries[r];
        state_distance(self.models[r], self.slice(x, r), &q.goal) <= q.alpha - 1e-9
    }

    /// Close enough to the goal center to park for good.
    fn settled(&self, r: usize, x: &[f64], t: f64) -> bool {
        let q = self.queries[r];
        let m = self.models[r];
        let xr = self.slice(x, r);
        state_distance(m, xr, &q.goal) <= 0.8 * q.alpha && self.obstacles.parked_clear(&position(m, xr), t)
    }

    fn is_goal(&self, x: &[f64], t: f64) -> bool {
        (0..self.len()).all(|r| {
            self.at_goal(r, x)
                && self
                    .obstacles
                    .parked_clear(&position(self.models[r], self.slice(x, r)), t)
        })
    }

    fn joint_goal(&self) -> Vec<f64> {
        self.queries.iter().flat_map(|q| q.goal.iter().copied()).collect()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        if rng.gen::<f64>() < self.params.goal_bias {
            return None;
        }
        let b = self.ws.bounds();
        let mut x = Vec::with_capacity(*self.soff.last().unwrap());
        for (r, m) in self.models.iter().enumerate() {
            // Teams also sample mixed targets where some robots head for their goals
            // while the rest explore, which is how one robot learns to step aside.
            if self.len() > 1 && rng.gen::<f64>() < TEAM_GOAL_MIX {
                x.extend_from_slice(&self.queries[r].goal);
                continue;
            }
            let axes = m.kind.position_dim();
            let mut s = vec![0.0; m.state_dim()];
            for a in 0..axes {
                s[a] = rng.gen_range(b.min[a]..b.max[a]);
            }
            match m.kind {
                ModelKind::Quadrotor2 => {}
                _ => {
                    s[2] = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                    if let Some(vb) = &m.velocity_bounds {
                        for (j, &i) in m.kind.velocity_indices().iter().enumerate() {
                            s[i] = rng.gen_range(vb.lo[j]..=vb.hi[j]);
                        }
                    }
                }
            }
            x.extend(s);
        }
        Some(x)
    }

    /// Maps a joint state into a space where the weighted metric is Euclidean, with
    /// each angle replaced by its weighted cosine and sine.
    fn embed_into(&self, x: &[f64], out: &mut Vec<f64>) {
        for r in 0..self.len() {
            let kind = self.models[r].kind;
            let w = weights(kind);
            for (i, v) in self.slice(x, r).iter().enumerate() {
                if kind.is_angle(i) {
                    out.push(w[i] * v.cos());
                    out.push(w[i] * v.sin());
                } else {
                    out.push(w[i] * v);
                }
            }
        }
    }

    fn policy(&self, r: usize, x: &[f64], target: &[f64], rng: &mut ChaCha8Rng) -> Policy {
        let m = self.models[r];
        match m.kind {
            ModelKind::Quadrotor2 => {
                let vmax = self.params.quad_speed;
                if rng.gen::<f64>() < 0.5 {
                    let d = [target[0] - x[0], target[1] - x[1], target[2] - x[2]];
                    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-9);
                    let speed = rng.gen_range(0.0..vmax).min(APPROACH_GAIN * n);
                    Policy::Velocity([d[0] / n * speed, d[1] / n * speed, d[2] / n * speed])
                } else {
                    Policy::Velocity([
                        rng.gen_range(-vmax..vmax),
                        rng.gen_range(-vmax..vmax),
                        rng.gen_range(-vmax..vmax) * 0.5,
                    ])
                }
            }
            _ => {
                let cb = &m.control_bounds;
                Policy::Constant(Control(
                    cb.lo.iter().zip(&cb.hi).map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect(),
                ))
            }
        }
    }

    fn control(&self, r: usize, policy: &Policy, x: &[f64]) -> Control {
        let m = self.models[r];
        let dt = self.params.dt;
        match policy {
            Policy::Hold(anchor) => hold_control(m, x, anchor, dt),
            Policy::Steer(target) => match m.kind {
                ModelKind::Quadrotor2 => {
                    let d = [target[0] - x[0], target[1] - x[1], target[2] - x[2]];
                    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-9);
                    let speed = (APPROACH_GAIN * n).min(self.params.quad_speed);
                    quadrotor_velocity_control(m, x, [d[0] / n * speed, d[1] / n * speed, d[2] / n * speed], 0.0, dt)
                }
                _ => unicycle_steer_control(m, x, target, dt),
            },
            Policy::Constant(u) => u.clone(),
            Policy::Velocity(v) => quadrotor_velocity_control(m, x, *v, 0.0, dt),
        }
    }

    /// Rolls one robot's policy out, stopping before the first invalid state.
    fn rollout_robot(&self, r: usize, x0: &[f64], t0: f64, policy: &Policy, steps: usize) -> Vec<(Vec<f64>, Control)> {
        let m = self.models[r];
        let dt = self.params.dt;
        let mut out: Vec<(Vec<f64>, Control)> = Vec::with_capacity(steps);
        let mut t = t0;
        for _ in 0..steps {
            let x = out.last().map_or(x0, |s| &s.0[..]);
            let u = self.control(r, policy, x);
            let next = euler_step(m, x, &u, dt).0;
            if !m.velocity_ok(&next, 0.0) || !self.roomy(m, &next) {
                break;
            }
            if !self.obstacles.is_empty()
                && !self.obstacles.transition_clear(&position(m, x), t, &position(m, &next), t + dt)
            {
                break;
            }
            out.push((next, u));
            t += dt;
        }
        if m.kind != ModelKind::Unicycle1 {
            // Drop a tail the robot could not brake out of before hitting the workspace.
            let mut tries = 0;
            while let Some(last) = out.last() {
                if tries == 3 || self.can_stop(r, &last.0) {
                    break;
                }
                out.pop();
                tries += 1;
            }
            if tries == 3 {
                out.clear();
            }
        }
        out
    }

    fn roomy(&self, m: &RobotModel, x: &[f64]) -> bool {
        clearance(&m.body, &extract_configuration(m, x), self.ws) > self.params.clearance_margin
    }

    fn can_stop(&self, r: usize, x: &[f64]) -> bool {
        let m = self.models[r];
        let dt = self.params.dt;
        let mut x = x.to_vec();
        let anchor = x.clone();
        for _ in 0..BRAKE_STEPS {
            let u = hold_control(m, &x, &anchor, dt);
            x = euler_step(m, &x, &u, dt).0;
            if !self.roomy(m, &x) {
                return false;
            }
        }
        true
    }

    /// One extension from `node` toward `target`. Each robot ranks its own sampled
    /// candidates (a hold among them) by closeness to its part of the target; ranked
    /// candidates are then combined, keeping the longest prefix where the team stays
    /// separated.
    fn extend(&self, node: &Node, target: &[f64], rng: &mut ChaCha8Rng) -> Option<Node> {
        let steps = rng.gen_range(1..=self.params.max_steps.max(1));
        let n_cand = self.params.candidates.max(1);
        let mut ranked = Vec::with_capacity(self.len());
        for r in 0..self.len() {
            let xr = self.slice(&node.state, r);
            let tr = self.slice(target, r);
            let kind = self.models[r].kind;
            let mut cands: Vec<(f64, Vec<(Vec<f64>, Control)>)> = Vec::with_capacity(n_cand);
            let tries = if node.arrived[r] { 1 } else { n_cand };
            for c in 0..tries {
                let policy = if c == 0 {
                    let anchor = if self.at_goal(r, &node.state) { &self.queries[r].goal.0[..] } else { xr };
                    Policy::Hold(anchor.to_vec())
                } else if c == 1 {
                    Policy::Steer(tr.to_vec())
                } else {
                    self.policy(r, xr, tr, rng)
                };
                let roll = self.rollout_robot(r, xr, node.time, &policy, steps);
                if let Some(last) = roll.last() {
                    cands.push((weighted_sq(kind, &last.0, tr, f64::INFINITY), roll));
                }
            }
            if cands.is_empty() {
                return None;
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0));
            ranked.push(cands);
        }
        let depth = ranked.iter().map(Vec::len).max().unwrap_or(0);
        for k in 0..depth {
            let pick: Vec<&[(Vec<f64>, Control)]> = ranked.iter().map(|c| &c[k.min(c.len() - 1)].1[..]).collect();
            let len = pick.iter().map(|p| p.len()).min().unwrap_or(0);
            let mut valid = 0;
            'walk: for s in 0..len {
                for i in 0..self.len() {
                    let pi = position(self.models[i], &pick[i][s].0);
                    for j in i + 1..self.len() {
                        if distance3(&pi, &position(self.models[j], &pick[j][s].0)) < self.separation {
                            break 'walk;
                        }
                    }
                }
                valid = s + 1;
            }
            if valid == 0 {
                continue;
            }
            let mut state = node.state.clone();
            let mut controls = Vec::with_capacity(valid * self.coff.last().unwrap());
            let mut t = node.time;
            for s in 0..valid {
                for r in 0..self.len() {
                    state[self.soff[r]..self.soff[r + 1]].copy_from_slice(&pick[r][s].0);
                    controls.extend_from_slice(&pick[r][s].1);
                }
                t += self.params.dt;
                if self.is_goal(&state, t) {
                    break;
                }
            }
            let arrived = (0..self.len())
                .map(|r| node.arrived[r] || self.settled(r, &state, t))
                .collect();
            return Some(Node {
                state,
                parent: 0,
                controls,
                time: t,
                arrived,
            });
        }
        None
    }

    /// Steers every robot straight at its goal (arrived ones hold) for up to
    /// `connect_steps`, keeping the valid prefix.
    fn connect(&self, node: &Node) -> Option<Node> {
        let dt = self.params.dt;
        let mut state = node.state.clone();
        let mut arrived = node.arrived.clone();
        let mut controls = vec![];
        let mut t = node.time;
        let mut next = state.clone();
        for _ in 0..self.params.connect_steps {
            for r in 0..self.len() {
                let m = self.models[r];
                let (lo, hi) = (self.soff[r], self.soff[r + 1]);
                let x = &state[lo..hi];
                let goal = &self.queries[r].goal;
                let u = if arrived[r] {
                    hold_control(m, x, goal, dt)
                } else {
                    self.control(r, &Policy::Steer(goal.0.clone()), x)
                };
                let xn = euler_step(m, x, &u, dt).0;
                if !m.velocity_ok(&xn, 0.0)
                    || !self.roomy(m, &xn)
                    || (!self.obstacles.is_empty()
                        && !self.obstacles.transition_clear(&position(m, x), t, &position(m, &xn), t + dt))
                {
                    return self.finish_connect(state, controls, t, arrived);
                }
                next[lo..hi].copy_from_slice(&xn);
                controls.extend_from_slice(&u);
            }
            for i in 0..self.len() {
                let pi = position(self.models[i], self.slice(&next, i));
                for j in i + 1..self.len() {
                    if distance3(&pi, &position(self.models[j], self.slice(&next, j))) < self.separation {
                        let keep = controls.len() - self.coff.last().unwrap();
                        controls.truncate(keep);
                        return self.finish_connect(state, controls, t, arrived);
                    }
                }
            }
            std::mem::swap(&mut state, &mut next);
            t += dt;
            for (r, a) in arrived.iter_mut().enumerate() {
                *a = *a || self.settled(r, &state, t);
            }
            if self.is_goal(&state, t) {
                break;
            }
        }
        self.finish_connect(state, controls, t, arrived)
    }

    fn finish_connect(&self, state: Vec<f64>, mut controls: Vec<f64>, time: f64, arrived: Vec<bool>) -> Option<Node> {
        let width = *self.coff.last().unwrap();
        controls.truncate(controls.len() / width * width);
        (!controls.is_empty()).then_some(Node {
            state,
            parent: 0,
            controls,
            time,
            arrived,
        })
    }

    fn plan(&self, seed: u64, budget: usize, deadline: Option<Instant>) -> Result<Vec<Trajectory>, PlanError> {
        let root = self.root()?;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let (a, b) = (position(self.models[i], self.slice(&root, i)), position(self.models[j], self.slice(&root, j)));
                if distance3(&a, &b) < self.separation - self.params.separation_margin {
                    return Err(PlanError::InvalidInput(format!("robots {i} and {j} start too close")));
                }
            }
        }
        let mut emb = Vec::new();
        self.embed_into(&root, &mut emb);
        let stride = emb.len();
        let mut nodes = vec![Node {
            state: root,
            parent: 0,
            controls: vec![],
            time: 0.0,
            arrived: vec![false; self.len()],
        }];
        if self.is_goal(&nodes[0].state, 0.0) {
            return Ok(self.reconstruct(&nodes, 0));
        }
        let mut fails = vec![0u8];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut target_emb = Vec::with_capacity(stride);
        for attempt in 0..budget {
            if attempt % 32 == 0 && expired(deadline) {
                return Err(PlanError::Timeout);
            }
            let sampled = self.sample(&mut rng);
            let target = sampled.clone().unwrap_or_else(|| self.joint_goal());
            target_emb.clear();
            self.embed_into(&target, &mut target_emb);
            let mut near = (usize::MAX, f64::INFINITY);
            for (i, row) in emb.chunks_exact(stride).enumerate() {
                if i > 0 && fails[i] >= DEAD_AFTER {
                    continue;
                }
                let d: f64 = row.iter().zip(&target_emb).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < near.1 {
                    near = (i, d);
                }
            }
            let grown = match sampled {
                Some(_) => self.extend(&nodes[near.0], &target, &mut rng),
                None => self.connect(&nodes[near.0]),
            };
            let Some(mut node) = grown else {
                fails[near.0] += 1;
                continue;
            };
            node.parent = near.0;
            self.embed_into(&node.state, &mut emb);
            let goal = self.is_goal(&node.state, node.time);
            nodes.push(node);
            fails.push(0);
            if goal {
                return Ok(self.reconstruct(&nodes, nodes.len() - 1));
            }
        }
        Err(PlanError::BudgetExhausted {
            robot: None,
            attempts: budget,
        })
    }

    fn reconstruct(&self, nodes: &[Node], leaf: usize) -> Vec<Trajectory> {
        let mut chain = vec![];
        let mut at = leaf;
        while at != 0 {
            chain.push(at);
            at = nodes[at].parent;
        }
        chain.reverse();
        let joint: Vec<&[f64]> = chain
            .iter()
            .flat_map(|&i| nodes[i].controls.chunks(*self.coff.last().unwrap()))
            .collect();
        (0..self.len())
            .map(|r| {
                let controls = joint
                    .iter()
                    .map(|u| Control(u[self.coff[r]..self.coff[r + 1]].to_vec()))
                    .collect();
                Trajectory::rollout(self.models[r], self.queries[r].start.clone(), controls, self.params.dt)
                    .expect("tree controls are within bounds")
            })
            .collect()
    }
}

/// Single-robot kinodynamic RRT among static obstacles and moving ones.
pub fn plan_kinodynamic_rrt(
    ws: &Workspace,
    model: &RobotModel,
    query: &Query,
    obstacles: &MovingObstacles,
    seed: u64,
    params: &RrtParams,
    deadline: Option<Instant>,
) -> Result<Trajectory, PlanError> {
    let obs = with_margin(obstacles, params);
    let team = Team::new(ws, vec![model], vec![query], &obs, 0.0, params)?;
    Ok(team.plan(seed, params.single_budget, deadline)?.pop().unwrap())
}

fn with_margin(obstacles: &MovingObstacles, params: &RrtParams) -> MovingObstacles {
    let mut o = obstacles.clone();
    o.d_min += params.separation_margin;
    o
}

/// Plans robots one at a time in `order`; each finished trajectory becomes a moving
/// obstacle for the robots after it.
#[allow(clippy::too_many_arguments)]
pub fn plan_decoupled_rrt(
    ws: &Workspace,
    models: &[&RobotModel],
    queries: &[Query],
    order: &[usize],
    obstacles: &MovingObstacles,
    seed: u64,
    params: &RrtParams,
    deadline: Option<Instant>,
) -> Result<Vec<Trajectory>, PlanError> {
    if models.len() != queries.len() || order.len() != models.len() {
        return Err(PlanError::InvalidInput("one query and one priority per robot required".into()));
    }
    let mut obs = obstacles.clone();
    let mut out: Vec<Option<Trajectory>> = vec![None; models.len()];
    for (rank, &r) in order.iter().enumerate() {
        let traj = plan_kinodynamic_rrt(ws, models[r], &queries[r], &obs, seed.wrapping_add(rank as u64), params, deadline)
            .map_err(|e| match e {
                PlanError::BudgetExhausted { attempts, .. } => PlanError::BudgetExhausted {
                    robot: Some(r),
                    attempts,
                },
                other => other,
            })?;
        obs.push(Timeline::of_trajectory(models[r], &traj, obs.t0));
        out[r] = Some(traj);
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

/// One tree over the stacked team state with a shared timestep; every robot reaches its
/// goal region at the same final step.
pub fn plan_composite_rrt(
    ws: &Workspace,
    models: &[&RobotModel],
    queries: &[Query],
    obstacles: &MovingObstacles,
    seed: u64,
    params: &RrtParams,
    deadline: Option<Instant>,
) -> Result<Vec<Trajectory>, PlanError> {
    let obs = with_margin(obstacles, params);
    let team = Team::new(
        ws,
        models.to_vec(),
        queries.iter().collect(),
        &obs,
        obstacles.d_min + params.separation_margin,
        params,
    )?;
    team.plan(seed, params.composite_budget, deadline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{feasibility_residual, State};
    use crate::geometry::{Aabb, Dim, Point};

    fn open() -> Workspace {
        Workspace::new(
            Dim::Planar,
            Aabb {
                min: Point::new(-3.0, -3.0, 0.0),
                max: Point::new(3.0, 3.0, 0.0),
            },
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn single_robot_reaches_goal() {
        let m = RobotModel::unicycle1();
        let q = Query::new(State(vec![-1.0, 0.0, 0.0]), State(vec![1.0, 0.0, 0.0]), 0.2);
        let t = plan_kinodynamic_rrt(&open(), &m, &q, &MovingObstacles::none(0.5), 3, &RrtParams::default(), None).unwrap();
        assert_eq!(feasibility_residual(&m, &t), 0.0);
        assert!(state_distance(&m, t.last(), &q.goal) <= 0.2);
        let again = plan_kinodynamic_rrt(&open(), &m, &q, &MovingObstacles::none(0.5), 3, &RrtParams::default(), None).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn trivial_query_gives_single_state() {
        let m = RobotModel::unicycle2();
        let q = Query::new(State(vec![0.0; 5]), State(vec![0.05, 0.0, 0.0, 0.0, 0.0]), 0.2);
        let t = plan_kinodynamic_rrt(&open(), &m, &q, &MovingObstacles::none(0.5), 3, &RrtParams::default(), None).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn composite_swap() {
        let m = RobotModel::unicycle1();
        let qs = vec![
            Query::new(State(vec![-1.0, 0.0, 0.0]), State(vec![1.0, 0.0, 0.0]), 0.2),
            Query::new(State(vec![1.0, 0.0, std::f64::consts::PI]), State(vec![-1.0, 0.0, std::f64::consts::PI]), 0.2),
        ];
        let ms = vec![&m, &m];
        let ts = plan_composite_rrt(&open(), &ms, &qs, &MovingObstacles::none(0.5), 5, &RrtParams::default(), None).unwrap();
        assert_eq!(ts[0].len(), ts[1].len());
        for k in 0..ts[0].len() {
            let (a, b) = (&ts[0].states[k], &ts[1].states[k]);
            assert!(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() >= 0.5);
        }
    }
}

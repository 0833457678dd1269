use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{KinematicPath, PlanError, Query};
use crate::dynamics::{extract_configuration, ModelKind, RobotModel};
use crate::geometry::{angle_diff, in_free_space, Pose, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KinematicParams {
    pub goal_bias: f64,
    /// Maximum edge length added per iteration.
    pub step: f64,
    /// Waypoint spacing of the returned path.
    pub resolution: f64,
    /// Spacing of collision checks along edges.
    pub check_resolution: f64,
    /// Angular spacing of collision checks while turning in place.
    pub check_angle: f64,
    pub max_iterations: usize,
}

impl Default for KinematicParams {
    fn default() -> Self {
        Self {
            goal_bias: 0.1,
            step: 0.5,
            resolution: 0.25,
            check_resolution: 0.05,
            check_angle: 0.1,
            max_iterations: 20_000,
        }
    }
}

type P3 = [f64; 3];

fn dist(a: &P3, b: &P3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

struct Checker<'a> {
    ws: &'a Workspace,
    model: &'a RobotModel,
    params: &'a KinematicParams,
    planar: bool,
}

impl Checker<'_> {
    fn pose(&self, p: &P3, heading: f64) -> Pose {
        if self.planar {
            Pose::planar(p[0], p[1], heading)
        } else {
            Pose::spatial(p[0], p[1], p[2], 0.0, 0.0, 0.0)
        }
    }

    fn free(&self, p: &P3, heading: f64) -> bool {
        in_free_space(&self.model.body, &self.pose(p, heading), self.ws)
    }

    /// Turning in place from `from` to `to` (shortest way) stays collision free.
    fn turn(&self, p: &P3, from: f64, to: f64) -> bool {
        if !self.planar {
            return true;
        }
        let delta = angle_diff(to, from);
        let n = (delta.abs() / self.params.check_angle).ceil() as usize;
        (1..=n).all(|s| self.free(p, from + delta * s as f64 / n as f64))
    }

    fn heading(a: &P3, b: &P3, fallback: f64) -> f64 {
        if dist(a, b) < 1e-12 {
            fallback
        } else {
            (b[1] - a[1]).atan2(b[0] - a[0])
        }
    }

    /// Edge from `a` (currently facing `h0`) to `b`; returns the travel heading when valid.
    fn edge(&self, a: &P3, h0: f64, b: &P3) -> Option<f64> {
        let h = Self::heading(a, b, h0);
        if !self.turn(a, h0, h) {
            return None;
        }
        let len = dist(a, b);
        let n = (len / self.params.check_resolution).ceil().max(1.0) as usize;
        for s in 1..=n {
            let f = s as f64 / n as f64;
            let p = [a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f, a[2] + (b[2] - a[2]) * f];
            if !self.free(&p, h) {
                return None;
            }
        }
        Some(h)
    }
}

fn point(pose: &Pose) -> P3 {
    [pose.translation.x, pose.translation.y, pose.translation.z]
}

/// Geometric RRT in position space with goal bias, followed by greedy shortcutting and
/// densification to the waypoint resolution.
///
/// Unicycle waypoints face along their edge and turn in place at corners; the first and
/// last waypoints keep the query's headings. Quadrotor waypoints keep zero attitude.
pub fn plan_kinematic(
    ws: &Workspace,
    model: &RobotModel,
    query: &Query,
    seed: u64,
    params: &KinematicParams,
) -> Result<KinematicPath, PlanError> {
    if model.kind.workspace_dim() != ws.dim() {
        return Err(PlanError::InvalidInput("model and workspace dimensions differ".into()));
    }
    let start = extract_configuration(model, &query.start);
    let goal = extract_configuration(model, &query.goal);
    let planar = model.kind != ModelKind::Quadrotor2;
    let checker = Checker {
        ws,
        model,
        params,
        planar,
    };
    if !in_free_space(&model.body, &start, ws) {
        return Err(PlanError::InvalidInput("start configuration is not free".into()));
    }
    let config_gap = {
        let d = dist(&point(&start), &point(&goal));
        let a = angle_diff(goal.yaw, start.yaw) + angle_diff(goal.roll, start.roll) + angle_diff(goal.pitch, start.pitch);
        (d * d + a * a).sqrt()
    };
    if config_gap <= query.alpha {
        return Ok(KinematicPath {
            configurations: vec![start],
        });
    }
    let (s, g) = (point(&start), point(&goal));
    let h_start = if planar { start.yaw } else { 0.0 };
    let h_goal = if planar { goal.yaw } else { 0.0 };
    let goal_free = checker.free(&g, h_goal);

    let connects = |a: &P3, h: f64| -> bool {
        goal_free && checker.edge(a, h, &g).is_some_and(|h1| checker.turn(&g, h1, h_goal))
    };

    let mut nodes: Vec<(P3, f64, usize)> = vec![(s, h_start, 0)];
    let mut found = connects(&s, h_start).then_some(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = ws.bounds();
    let axes = ws.dim().count();
    let mut iterations = 0;
    while found.is_none() {
        if iterations >= params.max_iterations {
            return Err(PlanError::BudgetExhausted {
                robot: None,
                attempts: iterations,
            });
        }
        iterations += 1;
        let target: P3 = if rng.gen::<f64>() < params.goal_bias {
            g
        } else {
            let mut q = [0.0; 3];
            for (a, v) in q.iter_mut().enumerate().take(axes) {
                *v = rng.gen_range(b.min[a]..b.max[a]);
            }
            q
        };
        let (near, _) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, dist(&n.0, &target)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        let from = nodes[near].0;
        let d = dist(&from, &target);
        if d < 1e-9 {
            continue;
        }
        let f = (params.step / d).min(1.0);
        let new = [
            from[0] + (target[0] - from[0]) * f,
            from[1] + (target[1] - from[1]) * f,
            from[2] + (target[2] - from[2]) * f,
        ];
        let Some(h) = checker.edge(&from, nodes[near].1, &new) else {
            continue;
        };
        nodes.push((new, h, near));
        let id = nodes.len() - 1;
        if dist(&new, &g) <= params.step && connects(&new, h) {
            found = Some(id);
        }
    }

    let mut chain = vec![g];
    let mut at = found.unwrap();
    loop {
        chain.push(nodes[at].0);
        if at == 0 {
            break;
        }
        at = nodes[at].2;
    }
    chain.reverse();

    // Greedy shortcutting: jump to the farthest reachable chain point.
    let last = chain.len() - 1;
    let mut kept = vec![0];
    let mut heading = h_start;
    let mut i = 0;
    while i < last {
        let mut j = last;
        let next = loop {
            let reach = checker.edge(&chain[i], heading, &chain[j]);
            let ok = match reach {
                Some(h) if j == last => checker.turn(&chain[j], h, h_goal).then_some(h),
                other => other,
            };
            match ok {
                Some(h) => break (j, h),
                // Adjacent chain points are connected by construction.
                None if j == i + 1 => break (j, checker.edge(&chain[i], heading, &chain[j]).unwrap_or(heading)),
                None => j -= 1,
            }
        };
        kept.push(next.0);
        heading = next.1;
        i = next.0;
    }

    let mut configurations = vec![start];
    let mut heading = h_start;
    for w in kept.windows(2) {
        let (a, b) = (chain[w[0]], chain[w[1]]);
        let len = dist(&a, &b);
        if len < 1e-12 {
            continue;
        }
        heading = Checker::heading(&a, &b, heading);
        let n = (len / params.resolution).ceil() as usize;
        for s in 1..=n {
            let f = s as f64 / n as f64;
            let p = [a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f, a[2] + (b[2] - a[2]) * f];
            configurations.push(checker.pose(&p, heading));
        }
    }
    *configurations.last_mut().unwrap() = goal;
    Ok(KinematicPath { configurations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::State;
    use crate::geometry::{Aabb, ConvexPolytope, Dim, Obstacle, Point};

    fn open(obstacles: Vec<Obstacle>) -> Workspace {
        Workspace::new(
            Dim::Planar,
            Aabb {
                min: Point::new(-2.0, -3.0, 0.0),
                max: Point::new(7.0, 3.0, 0.0),
            },
            obstacles,
        )
        .unwrap()
    }

    fn q(s: [f64; 3], g: [f64; 3]) -> Query {
        Query::new(State(s.to_vec()), State(g.to_vec()), 0.2)
    }

    #[test]
    fn straight_path_in_empty_workspace() {
        let m = RobotModel::unicycle1();
        let ws = open(vec![]);
        let p = plan_kinematic(&ws, &m, &q([0.0, 0.0, 0.0], [5.0, 0.0, 0.0]), 1, &Default::default()).unwrap();
        assert_eq!(p.len(), 21);
        for (k, c) in p.configurations.iter().enumerate() {
            assert!((c.translation.x - 0.25 * k as f64).abs() < 1e-12);
            assert_eq!(c.translation.y, 0.0);
            assert!(in_free_space(&m.body, c, &ws));
        }
    }

    #[test]
    fn goal_inside_obstacle_exhausts_budget() {
        let m = RobotModel::unicycle1();
        let wall = Obstacle::new(ConvexPolytope::rectangle(1.0, 1.0).unwrap(), Pose::planar(5.0, 0.0, 0.0));
        let ws = open(vec![wall]);
        let params = KinematicParams {
            max_iterations: 300,
            ..Default::default()
        };
        let err = plan_kinematic(&ws, &m, &q([0.0, 0.0, 0.0], [5.0, 0.0, 0.0]), 1, &params).unwrap_err();
        assert!(matches!(err, PlanError::BudgetExhausted { .. }));
    }

    #[test]
    fn start_near_goal_is_a_single_waypoint() {
        let m = RobotModel::unicycle1();
        let p = plan_kinematic(&open(vec![]), &m, &q([0.0, 0.0, 0.0], [0.1, 0.0, 0.0]), 1, &Default::default()).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn detours_around_a_wall() {
        let m = RobotModel::unicycle1();
        let wall = Obstacle::new(ConvexPolytope::rectangle(0.4, 4.0).unwrap(), Pose::planar(2.5, 0.0, 0.0));
        let ws = open(vec![wall]);
        let a = plan_kinematic(&ws, &m, &q([0.0, 0.0, 0.0], [5.0, 0.0, 0.0]), 7, &Default::default()).unwrap();
        let b = plan_kinematic(&ws, &m, &q([0.0, 0.0, 0.0], [5.0, 0.0, 0.0]), 7, &Default::default()).unwrap();
        assert_eq!(a, b);
        for w in a.configurations.windows(2) {
            assert!((w[1].translation - w[0].translation).norm() <= 0.25 + 1e-12);
        }
        assert!(a.configurations.iter().all(|c| in_free_space(&m.body, c, &ws)));
        assert!(a.configurations.iter().any(|c| c.translation.y.abs() > 2.0));
    }
}

//! Time-indexed robot positions under zero-order hold.
//!
//! A robot's configuration at time `t` is the one at its last knot at or before `t`;
//! before its first knot it sits at the first knot and after its last knot it stays
//! parked there.

use crate::dynamics::{position, RobotModel, State, StitchedTrajectory, Trajectory};

/// Knot times closer than this are treated as simultaneous.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    times: Vec<f64>,
    states: Vec<State>,
    positions: Vec<[f64; 3]>,
}

pub fn distance3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl Timeline {
    /// Builds a timeline from parallel knot times and states; times must be nondecreasing.
    pub fn new(model: &RobotModel, times: Vec<f64>, states: Vec<State>) -> Self {
        assert_eq!(times.len(), states.len());
        assert!(!times.is_empty(), "timeline needs at least one knot");
        let positions = states.iter().map(|x| position(model, x)).collect();
        Self {
            times,
            states,
            positions,
        }
    }

    pub fn of_stitched(model: &RobotModel, traj: &StitchedTrajectory) -> Self {
        let states = traj.states().into_iter().cloned().collect();
        Self::new(model, traj.knot_times(), states)
    }

    /// A single piece starting at time `t0`.
    pub fn of_trajectory(model: &RobotModel, traj: &Trajectory, t0: f64) -> Self {
        let times = (0..traj.len()).map(|k| t0 + k as f64 * traj.dt).collect();
        Self::new(model, times, traj.states.clone())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn index_at(&self, t: f64) -> usize {
        self.times
            .partition_point(|&s| s <= t + TIME_EPS)
            .saturating_sub(1)
    }

    pub fn position_at(&self, t: f64) -> &[f64; 3] {
        &self.positions[self.index_at(t)]
    }
}

/// Other robots' timelines, seen as obstacles by a planner whose local time zero is the
/// global time `t0`.
#[derive(Debug, Clone)]
pub struct MovingObstacles {
    pub timelines: Vec<Timeline>,
    pub d_min: f64,
    pub t0: f64,
}

impl MovingObstacles {
    pub fn none(d_min: f64) -> Self {
        Self {
            timelines: vec![],
            d_min,
            t0: 0.0,
        }
    }

    pub fn new(timelines: Vec<Timeline>, d_min: f64, t0: f64) -> Self {
        Self { timelines, d_min, t0 }
    }

    pub fn is_empty(&self) -> bool {
        self.timelines.is_empty()
    }

    pub fn push(&mut self, timeline: Timeline) {
        self.timelines.push(timeline);
    }

    /// Smallest center distance to any obstacle at local time `t`.
    pub fn gap_at(&self, p: &[f64; 3], t: f64) -> f64 {
        self.timelines
            .iter()
            .map(|tl| distance3(p, tl.position_at(self.t0 + t)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn clear_at(&self, p: &[f64; 3], t: f64) -> bool {
        self.gap_at(p, t) >= self.d_min
    }

    /// Checks a transition that holds `prev` on `[t_prev, t_next)` and arrives at `next`
    /// at `t_next`, against every obstacle knot falling inside the interval.
    pub fn transition_clear(&self, prev: &[f64; 3], t_prev: f64, next: &[f64; 3], t_next: f64) -> bool {
        let (a, b) = (self.t0 + t_prev, self.t0 + t_next);
        for tl in &self.timelines {
            if distance3(next, tl.position_at(b)) < self.d_min {
                return false;
            }
            let first = tl.times.partition_point(|&s| s <= a + TIME_EPS);
            for k in first..tl.len() {
                if tl.times[k] + TIME_EPS >= b {
                    break;
                }
                if distance3(prev, &tl.positions[k]) < self.d_min {
                    return false;
                }
            }
        }
        true
    }

    /// Whether a robot parked at `p` from local time `t` onward stays clear forever.
    pub fn parked_clear(&self, p: &[f64; 3], t: f64) -> bool {
        let a = self.t0 + t;
        self.timelines.iter().all(|tl| {
            let first = tl.index_at(a);
            tl.positions[first..].iter().all(|q| distance3(p, q) >= self.d_min)
        })
    }
}

/// A pair of robots closer than `d_min` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Conflict {
    pub robot_i: usize,
    pub robot_j: usize,
    pub time: f64,
    pub k_i: usize,
    pub k_j: usize,
    pub state_i: State,
    pub state_j: State,
    pub distance: f64,
}

/// Merged, deduplicated knot times of two timelines no earlier than `from`.
fn union_times(a: &Timeline, b: &Timeline, from: f64) -> Vec<f64> {
    let mut all: Vec<f64> = a
        .times
        .iter()
        .chain(&b.times)
        .copied()
        .filter(|&t| t + TIME_EPS >= from)
        .collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|x, y| (*x - *y).abs() <= TIME_EPS);
    if from.is_finite() && all.first().is_none_or(|&t| t > from + TIME_EPS) {
        all.insert(0, from);
    }
    all
}

/// Earliest violating instant of one pair at or after `from`.
pub fn pair_conflict(a: &Timeline, b: &Timeline, d_min: f64, from: f64) -> Option<(f64, usize, usize, f64)> {
    for t in union_times(a, b, from) {
        let (ka, kb) = (a.index_at(t), b.index_at(t));
        let d = distance3(&a.positions[ka], &b.positions[kb]);
        if d < d_min {
            return Some((t, ka, kb, d));
        }
    }
    None
}

/// The earliest conflict among all pairs at or after `from`; simultaneous conflicts
/// resolve to the lexicographically smallest `(i, j)`.
pub fn find_conflict_from(timelines: &[Timeline], d_min: f64, from: f64) -> Option<Conflict> {
    // Robots that have not started yet already sit at their first knot, so the earliest
    // instant of the whole team is checked for every pair.
    let first = timelines.iter().map(Timeline::start_time).fold(f64::INFINITY, f64::min);
    let from = from.max(first);
    let mut best: Option<Conflict> = None;
    for i in 0..timelines.len() {
        for j in i + 1..timelines.len() {
            let limit = best.as_ref().map_or(f64::INFINITY, |c| c.time - TIME_EPS);
            let Some((t, ki, kj, d)) = pair_conflict(&timelines[i], &timelines[j], d_min, from) else {
                continue;
            };
            if t < limit {
                best = Some(Conflict {
                    robot_i: i,
                    robot_j: j,
                    time: t,
                    k_i: ki,
                    k_j: kj,
                    state_i: timelines[i].states[ki].clone(),
                    state_j: timelines[j].states[kj].clone(),
                    distance: d,
                });
            }
        }
    }
    best
}

pub fn find_conflict(timelines: &[Timeline], d_min: f64) -> Option<Conflict> {
    find_conflict_from(timelines, d_min, f64::NEG_INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Control, RobotModel};

    fn line(model: &RobotModel, x0: f64, y: f64, v: f64, steps: usize, dt: f64) -> Timeline {
        let theta = if v >= 0.0 { 0.0 } else { std::f64::consts::PI };
        let traj = Trajectory::rollout(
            model,
            State(vec![x0, y, theta]),
            vec![Control(vec![v.abs(), 0.0]); steps],
            dt,
        )
        .unwrap();
        Timeline::of_trajectory(model, &traj, 0.0)
    }

    #[test]
    fn zero_order_hold_lookup() {
        let m = RobotModel::unicycle1();
        let tl = line(&m, 0.0, 0.0, 1.0, 4, 0.5);
        assert_eq!(tl.index_at(-1.0), 0);
        assert_eq!(tl.index_at(0.49), 0);
        assert_eq!(tl.index_at(0.5), 1);
        assert_eq!(tl.index_at(0.5 - 1e-12), 1);
        assert_eq!(tl.index_at(100.0), 4);
    }

    #[test]
    fn head_on_crossing_conflicts_at_expected_step() {
        let m = RobotModel::unicycle1();
        // Both cover 0.5 per step and meet around x = 0 at step 7.
        let a = line(&m, -3.5, 0.0, 1.0, 14, 0.5);
        let b = line(&m, 3.5, 0.0, -1.0, 14, 0.5);
        let c = find_conflict(&[a, b], 1.0).unwrap();
        // Distance at step k is 7 - k; the first k with 7 - k < 1 is k = 7.
        assert_eq!((c.robot_i, c.robot_j, c.k_i, c.k_j), (0, 1, 7, 7));
        assert!((c.time - 3.5).abs() < 1e-12);
    }

    #[test]
    fn simultaneous_conflicts_break_ties_by_pair() {
        let m = RobotModel::unicycle1();
        let a = line(&m, -3.0, 0.0, 1.0, 6, 1.0);
        let b = line(&m, 3.0, 0.0, -1.0, 6, 1.0);
        let c = line(&m, 0.0, 3.0, 0.0, 6, 1.0);
        let d = line(&m, 0.0, -3.0, 0.0, 6, 1.0);
        let tls = vec![c, a, b, d];
        let conflict = find_conflict(&tls, 3.5).unwrap();
        assert_eq!((conflict.robot_i, conflict.robot_j), (0, 1));
    }

    #[test]
    fn parked_robots_still_conflict() {
        let m = RobotModel::unicycle1();
        let short = line(&m, 0.0, 0.0, 0.0, 1, 0.1);
        let long = line(&m, -5.0, 0.0, 1.0, 10, 0.5);
        let c = find_conflict(&[short, long], 0.5).unwrap();
        assert_eq!(c.k_i, 1);
        assert!(c.time > 4.5);
    }

    #[test]
    fn moving_obstacles_check_interior_knots() {
        let m = RobotModel::unicycle1();
        // Obstacle sits at the origin only during (0.1, 0.3).
        let tl = Timeline::new(
            &m,
            vec![0.0, 0.1, 0.3],
            vec![State(vec![5.0, 0.0, 0.0]), State(vec![0.0, 0.0, 0.0]), State(vec![5.0, 0.0, 0.0])],
        );
        let obs = MovingObstacles::new(vec![tl], 1.0, 0.0);
        let origin = [0.0, 0.0, 0.0];
        assert!(!obs.transition_clear(&origin, 0.0, &[3.0, 0.0, 0.0], 0.5));
        assert!(obs.transition_clear(&[3.0, 0.0, 0.0], 0.0, &origin, 0.5));
        assert!(obs.parked_clear(&origin, 0.3));
        assert!(!obs.parked_clear(&origin, 0.2));
    }
}

//! Segment-wise multi-robot kinodynamic planning.
//!
//! Kinematic paths are split into segments. Each segment is turned into a dynamically
//! feasible trajectory per robot by the optimizer, then inter-robot conflicts are
//! resolved by subproblems solved with a hierarchy of multi-robot planners, widening
//! the subproblem's segment window whenever the whole hierarchy fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{extract_configuration, hold_rollout, State, StitchedTrajectory, Trajectory};
use crate::geometry::Pose;
use crate::optimizer::{optimize_prioritized, optimize_single_logged, transcribe, OptimizeError, OptimizerParams};
use crate::sampling::{
    plan_composite_rrt, plan_decoupled_rrt, plan_kinematic, plan_kinodynamic_rrt, KinematicParams, KinematicPath,
    PlanError, Query, RrtParams,
};
use crate::scenario::Scenario;
use crate::solution::{Metrics, Rung, Solution};
use crate::timeline::{find_conflict, Conflict, MovingObstacles, Timeline, TIME_EPS};
use crate::validate::validate_solution;

/// Cut times of different robots closer than this are the same synchronization point.
const SYNC_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    /// Number of path segments.
    pub segments: usize,
    pub timeout_s: f64,
    /// Subproblems allowed while one segment is being resolved.
    pub max_subproblems: usize,
    /// Subproblem solvers, tried in this order.
    pub rungs: Vec<Rung>,
    pub optimizer: OptimizerParams,
    pub rrt: RrtParams,
    pub kinematic: KinematicParams,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            segments: 5,
            timeout_s: 600.0,
            max_subproblems: 50,
            rungs: Rung::ALL.to_vec(),
            optimizer: OptimizerParams::default(),
            rrt: RrtParams::default(),
            kinematic: KinematicParams::default(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KarcError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("timed out")]
    Timeout,
    #[error("no kinematic path for robot {robot}: {source}")]
    Kinematic { robot: usize, source: PlanError },
    #[error("robot {robot} could not be planned through segment {segment}")]
    Segment { robot: usize, segment: usize },
    #[error("conflict among robots {robots:?} near segment {segment} could not be resolved")]
    Unresolvable { segment: usize, robots: Vec<usize> },
    #[error("more than {0} subproblems in one segment")]
    TooManySubproblems(usize),
    #[error("planned solution failed validation: {0}")]
    Invalid(String),
}

/// A failed run with whatever was measured before it stopped.
#[derive(Debug, Clone, Error)]
#[error("{error}")]
pub struct PlanFailure {
    pub error: KarcError,
    pub metrics: Metrics,
}

/// A kinematic path cut into consecutive segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub segments: Vec<Vec<Pose>>,
    /// One-based index into the original path of each segment's last waypoint.
    pub milestones: Vec<usize>,
}

impl Segmentation {
    pub fn milestone(&self, j: usize) -> &Pose {
        self.segments[j].last().expect("segments are non-empty")
    }
}

/// Splits a path of `T` waypoints into `m` segments of `ceil(T/m)` waypoints, the last
/// taking the remainder. Segments past the end of the path repeat the final waypoint.
pub fn segment_path(path: &KinematicPath, m: usize) -> Result<Segmentation, KarcError> {
    let t = path.len();
    if t == 0 {
        return Err(KarcError::InvalidInput("empty path".into()));
    }
    if m == 0 {
        return Err(KarcError::InvalidInput("segment count must be positive".into()));
    }
    let c = t.div_ceil(m);
    let cfg = &path.configurations;
    let (segments, milestones) = (0..m)
        .map(|j| {
            let lo = j * c;
            if lo < t {
                let hi = ((j + 1) * c).min(t);
                (cfg[lo..hi].to_vec(), hi)
            } else {
                (vec![cfg[t - 1].clone()], t)
            }
        })
        .unzip();
    Ok(Segmentation { segments, milestones })
}

/// Robots whose conflicts are resolved together, with the segment range each must be
/// replanned over before any widening.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Subproblem {
    /// Sorted robot indices.
    pub robots: Vec<usize>,
    pub base: Vec<(usize, usize)>,
    pub level: usize,
    pub segments: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("subproblem already spans every segment")]
pub struct CannotAdapt;

impl Subproblem {
    /// Segment window of the `k`-th robot at the current level.
    pub fn window(&self, k: usize) -> (usize, usize) {
        let (lo, hi) = self.base[k];
        (lo.saturating_sub(self.level), (hi + self.level).min(self.segments - 1))
    }

    pub fn fully_widened(&self) -> bool {
        (0..self.robots.len()).all(|k| self.window(k) == (0, self.segments - 1))
    }

    pub fn contains(&self, robot: usize) -> bool {
        self.robots.binary_search(&robot).is_ok()
    }

    /// Union of robots; shared robots take the union of their ranges; the level is the
    /// larger one.
    pub fn merge(&self, other: &Subproblem) -> Subproblem {
        let mut robots: Vec<usize> = self.robots.iter().chain(&other.robots).copied().collect::<BTreeSet<_>>().into_iter().collect();
        robots.dedup();
        let range = |sp: &Subproblem, r: usize| sp.robots.binary_search(&r).ok().map(|k| sp.base[k]);
        let base = robots
            .iter()
            .map(|&r| match (range(self, r), range(other, r)) {
                (Some(a), Some(b)) => (a.0.min(b.0), a.1.max(b.1)),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => unreachable!(),
            })
            .collect();
        Subproblem {
            robots,
            base,
            level: self.level.max(other.level),
            segments: self.segments,
        }
    }
}

/// Level-0 subproblem for a conflict, given the segment range each robot is in at the
/// conflict time.
pub fn create_subproblem(conflict: &Conflict, range_i: (usize, usize), range_j: (usize, usize), segments: usize) -> Subproblem {
    let (a, b) = (conflict.robot_i.min(conflict.robot_j), conflict.robot_i.max(conflict.robot_j));
    let (ra, rb) = if conflict.robot_i <= conflict.robot_j { (range_i, range_j) } else { (range_j, range_i) };
    Subproblem {
        robots: vec![a, b],
        base: vec![ra, rb],
        level: 0,
        segments,
    }
}

/// Widens every robot's window by one segment on each side.
pub fn adapt_subproblem(sp: &Subproblem) -> Result<Subproblem, CannotAdapt> {
    if sp.fully_widened() {
        return Err(CannotAdapt);
    }
    Ok(Subproblem {
        level: sp.level + 1,
        ..sp.clone()
    })
}

/// How a robot's segment trajectory was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentStatus {
    Optimized,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubproblemRecord {
    pub robots: Vec<usize>,
    pub level: usize,
    pub rung: Rung,
    pub start_time: f64,
}

/// One record per planned segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentRecord {
    pub segment: usize,
    pub robots: Vec<(usize, SegmentStatus)>,
    pub conflicts: usize,
    pub subproblems: Vec<SubproblemRecord>,
}

/// Start of a stretch of a robot's trajectory planned for segments `lo..=hi`.
#[derive(Debug, Clone)]
struct Cut {
    time: f64,
    pieces: usize,
    state: State,
    lo: usize,
    hi: usize,
}

#[derive(Debug, Clone)]
struct Track {
    pieces: Vec<Trajectory>,
    cuts: Vec<Cut>,
    /// Next segment to plan.
    cursor: usize,
    start: State,
}

impl Track {
    fn end_state(&self) -> &State {
        self.pieces.last().map_or(&self.start, |p| p.last())
    }

    fn end_time(&self) -> f64 {
        self.pieces.iter().map(Trajectory::duration).sum()
    }

    fn range_at(&self, t: f64) -> (usize, usize) {
        let c = self.cuts.iter().rev().find(|c| c.time <= t + TIME_EPS).unwrap_or(&self.cuts[0]);
        (c.lo, c.hi)
    }

    fn truncate(&mut self, cut: usize, hi: usize) {
        self.cuts.truncate(cut + 1);
        let c = &mut self.cuts[cut];
        c.hi = hi;
        self.pieces.truncate(c.pieces);
        self.cursor = hi + 1;
    }

    fn push(&mut self, piece: Trajectory) {
        if piece.len() > 1 {
            self.pieces.push(piece);
        }
    }
}

struct Prepared {
    start_time: f64,
    cuts: Vec<usize>,
    windows: Vec<(usize, usize)>,
    queries: Vec<Query>,
    references: Vec<KinematicPath>,
    obstacles: MovingObstacles,
}

struct Resolution {
    prepared: Prepared,
    pieces: Vec<Trajectory>,
    rung: Rung,
    subproblem: Subproblem,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Planner<'s> {
    scenario: &'s Scenario,
    params: &'s PlannerParams,
    seed: u64,
    deadline: Instant,
    segs: Vec<Segmentation>,
    tracks: Vec<Track>,
    metrics: Metrics,
    calls: u64,
}

fn optimizer_error(e: OptimizeError) -> Option<KarcError> {
    matches!(e, OptimizeError::Timeout).then_some(KarcError::Timeout)
}

fn sampler_error(e: PlanError) -> Option<KarcError> {
    matches!(e, PlanError::Timeout).then_some(KarcError::Timeout)
}

impl<'s> Planner<'s> {
    fn next_seed(&mut self) -> u64 {
        self.calls += 1;
        mix(self.seed, 0x5eed, self.calls)
    }

    fn expired(&self) -> bool {
        Instant::now() >= self.deadline
    }

    fn goal_state(&self, robot: usize, j: usize) -> State {
        let spec = &self.scenario.robots[robot];
        if j + 1 == self.params.segments {
            spec.goal.clone()
        } else {
            spec.model.rest_state(self.segs[robot].milestone(j))
        }
    }

    /// Reference for robot `robot` from `state` through segments `lo..=hi`.
    fn reference(&self, robot: usize, state: &State, lo: usize, hi: usize) -> KinematicPath {
        let model = &self.scenario.robots[robot].model;
        let mut configurations = vec![extract_configuration(model, state)];
        for seg in &self.segs[robot].segments[lo..=hi] {
            configurations.extend(seg.iter().cloned());
        }
        KinematicPath { configurations }
    }

    fn timelines(&self) -> Vec<Timeline> {
        self.tracks
            .iter()
            .zip(&self.scenario.robots)
            .map(|(tr, spec)| {
                let mut times = vec![0.0];
                let mut states = vec![tr.start.clone()];
                let mut t = 0.0;
                for p in &tr.pieces {
                    for (k, x) in p.states.iter().enumerate().skip(1) {
                        times.push(t + k as f64 * p.dt);
                        states.push(x.clone());
                    }
                    t += p.duration();
                }
                Timeline::new(&spec.model, times, states)
            })
            .collect()
    }

    /// Pads the robots with holds so all of them reach the same time, then records that
    /// time as the start of segment `j`.
    fn synchronize(&mut self, robots: &[usize], j: usize) {
        let ends: Vec<f64> = robots.iter().map(|&r| self.tracks[r].end_time()).collect();
        let mut w = ends.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dt_min = robots.iter().map(|&r| self.scenario.robots[r].model.dt_bounds.0).fold(0.0, f64::max);
        if ends.iter().any(|&e| w - e > TIME_EPS && w - e < dt_min) {
            w += dt_min;
        }
        for (&r, &e) in robots.iter().zip(&ends) {
            let model = &self.scenario.robots[r].model;
            let gap = w - e;
            let track = &mut self.tracks[r];
            if gap > TIME_EPS {
                // Hover feedback is only tuned for short steps.
                let step = model.dt_bounds.1.min(self.params.rrt.dt.max(model.dt_bounds.0));
                let steps = (gap / step).ceil().max(1.0) as usize;
                let hold = hold_rollout(model, track.end_state(), steps, gap / steps as f64);
                track.push(hold);
            }
            track.cuts.push(Cut {
                time: w,
                pieces: track.pieces.len(),
                state: track.end_state().clone(),
                lo: j,
                hi: j,
            });
        }
    }

    fn plan_segment(&mut self, robot: usize, j: usize) -> Result<(Trajectory, SegmentStatus), KarcError> {
        let spec = &self.scenario.robots[robot];
        let start = self.tracks[robot].end_state().clone();
        let query = Query::new(start.clone(), self.goal_state(robot, j), spec.alpha);
        let reference = self.reference(robot, &start, j, j);
        let ws = &self.scenario.workspace;
        let problem = transcribe(&spec.model, ws, &query, &reference, &self.params.optimizer)
            .map_err(|e| KarcError::InvalidInput(e.to_string()))?;
        match optimize_single_logged(&problem, &self.params.optimizer, &mut |_| {}, Some(self.deadline)) {
            Ok(o) => return Ok((o.trajectory, SegmentStatus::Optimized)),
            Err(e) => {
                if let Some(fatal) = optimizer_error(e) {
                    return Err(fatal);
                }
            }
        }
        self.metrics.segment_fallbacks += 1;
        let seed = self.next_seed();
        let spec = &self.scenario.robots[robot];
        let obstacles = MovingObstacles::none(self.scenario.d_min);
        plan_kinodynamic_rrt(ws, &spec.model, &query, &obstacles, seed, &self.params.rrt, Some(self.deadline))
            .map(|t| (t, SegmentStatus::Sampled))
            .map_err(|e| sampler_error(e).unwrap_or(KarcError::Segment { robot, segment: j }))
    }

    /// Queries, references and moving obstacles for a subproblem at its current level.
    /// All participants restart from their latest shared cut no later than the start of
    /// their windows.
    fn prepare(&self, sp: &Subproblem, timelines: &[Timeline]) -> Prepared {
        let windows: Vec<(usize, usize)> = (0..sp.robots.len()).map(|k| sp.window(k)).collect();
        let limit = sp
            .robots
            .iter()
            .zip(&windows)
            .map(|(&r, &(a, _))| {
                let cuts = &self.tracks[r].cuts;
                cuts.iter().rev().find(|c| c.lo <= a).unwrap_or(&cuts[0]).time
            })
            .fold(f64::INFINITY, f64::min);
        let lead = &self.tracks[sp.robots[0]].cuts;
        let shared = |t: f64| -> Option<Vec<usize>> {
            sp.robots
                .iter()
                .map(|&r| self.tracks[r].cuts.iter().position(|c| (c.time - t).abs() <= SYNC_EPS))
                .collect()
        };
        let (start_time, cuts) = lead
            .iter()
            .rev()
            .filter(|c| c.time <= limit + SYNC_EPS)
            .find_map(|c| shared(c.time).map(|idx| (c.time, idx)))
            .unwrap_or_else(|| (0.0, vec![0; sp.robots.len()]));
        let mut queries = vec![];
        let mut references = vec![];
        for ((&r, &ci), &(_, b)) in sp.robots.iter().zip(&cuts).zip(&windows) {
            let cut = &self.tracks[r].cuts[ci];
            queries.push(Query::new(cut.state.clone(), self.goal_state(r, b), self.scenario.robots[r].alpha));
            references.push(self.reference(r, &cut.state, cut.lo.min(b), b));
        }
        let others = timelines
            .iter()
            .enumerate()
            .filter(|(r, _)| !sp.contains(*r))
            .map(|(_, t)| t.clone())
            .collect();
        Prepared {
            start_time,
            cuts,
            windows,
            queries,
            references,
            obstacles: MovingObstacles::new(others, self.scenario.d_min, start_time),
        }
    }

    fn try_rung(&mut self, rung: Rung, sp: &Subproblem, prep: &Prepared) -> Result<Option<Vec<Trajectory>>, KarcError> {
        let models: Vec<_> = sp.robots.iter().map(|&r| &self.scenario.robots[r].model).collect();
        let ws = &self.scenario.workspace;
        let natural: Vec<usize> = (0..sp.robots.len()).collect();
        let deadline = Some(self.deadline);
        match rung {
            Rung::Prioritized => {
                let reversed: Vec<usize> = natural.iter().rev().copied().collect();
                for order in [natural, reversed] {
                    match optimize_prioritized(
                        &models,
                        ws,
                        &prep.queries,
                        &prep.references,
                        &order,
                        self.scenario.d_min,
                        &prep.obstacles,
                        &self.params.optimizer,
                        deadline,
                    ) {
                        Ok(t) => return Ok(Some(t)),
                        Err(e) => {
                            if let Some(fatal) = optimizer_error(e) {
                                return Err(fatal);
                            }
                        }
                    }
                }
                Ok(None)
            }
            Rung::DecoupledRrt => {
                let seed = self.next_seed();
                match plan_decoupled_rrt(ws, &models, &prep.queries, &natural, &prep.obstacles, seed, &self.params.rrt, deadline) {
                    Ok(t) => Ok(Some(t)),
                    Err(e) => sampler_error(e).map_or(Ok(None), Err),
                }
            }
            Rung::CompositeRrt => {
                let seed = self.next_seed();
                match plan_composite_rrt(ws, &models, &prep.queries, &prep.obstacles, seed, &self.params.rrt, deadline) {
                    Ok(t) => Ok(Some(t)),
                    Err(e) => sampler_error(e).map_or(Ok(None), Err),
                }
            }
        }
    }

    /// Tries every rung at the current level, widening on failure.
    fn solve_subproblem(&mut self, mut sp: Subproblem, segment: usize) -> Result<Resolution, KarcError> {
        let timelines = self.timelines();
        loop {
            if self.expired() {
                return Err(KarcError::Timeout);
            }
            let prep = self.prepare(&sp, &timelines);
            for &rung in &self.params.rungs.clone() {
                if let Some(pieces) = self.try_rung(rung, &sp, &prep)? {
                    return Ok(Resolution {
                        prepared: prep,
                        pieces,
                        rung,
                        subproblem: sp,
                    });
                }
            }
            sp = adapt_subproblem(&sp).map_err(|_| KarcError::Unresolvable {
                segment,
                robots: sp.robots.clone(),
            })?;
        }
    }

    fn apply(&mut self, res: &Resolution) {
        for (k, &r) in res.subproblem.robots.iter().enumerate() {
            let track = &mut self.tracks[r];
            track.truncate(res.prepared.cuts[k], res.prepared.windows[k].1);
            track.push(res.pieces[k].clone());
        }
    }

    /// Resolves every conflict that happens before some robot runs out of planned
    /// trajectory. Returns whether anything changed.
    fn resolve_conflicts(&mut self, segment: usize, record: &mut SegmentRecord) -> Result<bool, KarcError> {
        let m = self.params.segments;
        let mut groups: Vec<Subproblem> = vec![];
        let mut changed = false;
        loop {
            if self.expired() {
                return Err(KarcError::Timeout);
            }
            let horizon = self
                .tracks
                .iter()
                .filter(|t| t.cursor < m)
                .map(Track::end_time)
                .fold(f64::INFINITY, f64::min);
            let timelines = self.timelines();
            let Some(conflict) = find_conflict(&timelines, self.scenario.d_min).filter(|c| c.time < horizon - TIME_EPS) else {
                return Ok(changed);
            };
            record.conflicts += 1;
            if record.subproblems.len() >= self.params.max_subproblems {
                return Err(KarcError::TooManySubproblems(self.params.max_subproblems));
            }
            let (ri, rj) = (conflict.robot_i, conflict.robot_j);
            let mut sp = create_subproblem(
                &conflict,
                self.tracks[ri].range_at(conflict.time),
                self.tracks[rj].range_at(conflict.time),
                m,
            );
            let (joined, rest): (Vec<_>, Vec<_>) = groups.into_iter().partition(|g| g.contains(ri) || g.contains(rj));
            groups = rest;
            for g in &joined {
                sp = sp.merge(g);
            }
            let res = self.solve_subproblem(sp, segment)?;
            self.apply(&res);
            changed = true;
            self.metrics.conflicts_resolved += 1;
            self.metrics.record_rung(res.rung);
            self.metrics.max_adaptation_level = self.metrics.max_adaptation_level.max(res.subproblem.level);
            record.subproblems.push(SubproblemRecord {
                robots: res.subproblem.robots.clone(),
                level: res.subproblem.level,
                rung: res.rung,
                start_time: res.prepared.start_time,
            });
            groups.push(res.subproblem);
        }
    }

    fn run(&mut self, log: &mut dyn FnMut(&SegmentRecord)) -> Result<(), KarcError> {
        let m = self.params.segments;
        loop {
            let j = self.tracks.iter().map(|t| t.cursor).min().unwrap_or(m);
            let mut record = SegmentRecord {
                segment: j,
                robots: vec![],
                conflicts: 0,
                subproblems: vec![],
            };
            if j < m {
                let active: Vec<usize> = (0..self.tracks.len()).filter(|&r| self.tracks[r].cursor == j).collect();
                self.synchronize(&active, j);
                for &r in &active {
                    let (piece, status) = self.plan_segment(r, j)?;
                    self.tracks[r].push(piece);
                    self.tracks[r].cursor = j + 1;
                    record.robots.push((r, status));
                }
            }
            let changed = self.resolve_conflicts(j.min(m - 1), &mut record)?;
            log(&record);
            if j >= m && !changed {
                return Ok(());
            }
        }
    }
}

/// Plans a whole scenario.
pub fn plan(scenario: &Scenario, params: &PlannerParams, seed: u64) -> Result<Solution, PlanFailure> {
    plan_logged(scenario, params, seed, &mut |_| {})
}

/// Like [`plan`], reporting one record per segment iteration.
pub fn plan_logged(
    scenario: &Scenario,
    params: &PlannerParams,
    seed: u64,
    log: &mut dyn FnMut(&SegmentRecord),
) -> Result<Solution, PlanFailure> {
    let started = Instant::now();
    let fail = |error, mut metrics: Metrics| {
        metrics.runtime_s = started.elapsed().as_secs_f64();
        PlanFailure { error, metrics }
    };
    if let Err(e) = scenario.check() {
        return Err(fail(KarcError::InvalidInput(e.to_string()), Metrics::default()));
    }
    if params.segments == 0 || params.rungs.is_empty() || !(params.timeout_s > 0.0) {
        return Err(fail(KarcError::InvalidInput("invalid planner parameters".into()), Metrics::default()));
    }
    let deadline = started + Duration::from_secs_f64(params.timeout_s.min(1e9));
    let mut segs = vec![];
    for (r, spec) in scenario.robots.iter().enumerate() {
        let query = Query::new(spec.start.clone(), spec.goal.clone(), spec.alpha);
        let path = plan_kinematic(&scenario.workspace, &spec.model, &query, mix(seed, 0xa11, r as u64), &params.kinematic)
            .map_err(|source| fail(KarcError::Kinematic { robot: r, source }, Metrics::default()))?;
        segs.push(segment_path(&path, params.segments).map_err(|e| fail(e, Metrics::default()))?);
    }
    let tracks = scenario
        .robots
        .iter()
        .map(|spec| Track {
            pieces: vec![],
            cuts: vec![],
            cursor: 0,
            start: spec.start.clone(),
        })
        .collect();
    let mut planner = Planner {
        scenario,
        params,
        seed,
        deadline,
        segs,
        tracks,
        metrics: Metrics::default(),
        calls: 0,
    };
    if let Err(e) = planner.run(log) {
        return Err(fail(e, planner.metrics));
    }
    let trajectories: Vec<StitchedTrajectory> = planner
        .tracks
        .iter()
        .zip(&scenario.robots)
        .map(|(t, spec)| {
            if t.pieces.is_empty() {
                StitchedTrajectory::new(Trajectory::stationary(t.start.clone(), spec.model.dt_bounds.0))
            } else {
                StitchedTrajectory {
                    pieces: t.pieces.clone(),
                }
            }
        })
        .collect();
    let mut metrics = planner.metrics;
    metrics.runtime_s = started.elapsed().as_secs_f64();
    let report = validate_solution(scenario, &trajectories);
    if !report.is_valid() {
        return Err(fail(KarcError::Invalid(report.to_string()), metrics));
    }
    Ok(Solution::new(trajectories, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ModelKind;
    use crate::scenario::build_open_cross;

    fn path(t: usize) -> KinematicPath {
        KinematicPath {
            configurations: (0..t).map(|i| Pose::planar(i as f64, 0.0, 0.0)).collect(),
        }
    }

    fn sizes(s: &Segmentation) -> Vec<usize> {
        s.segments.iter().map(Vec::len).collect()
    }

    #[test]
    fn segmentation_examples() {
        let s = segment_path(&path(10), 3).unwrap();
        assert_eq!((sizes(&s), s.milestones.clone()), (vec![4, 4, 2], vec![4, 8, 10]));
        let s = segment_path(&path(9), 3).unwrap();
        assert_eq!((sizes(&s), s.milestones.clone()), (vec![3, 3, 3], vec![3, 6, 9]));
        let s = segment_path(&path(7), 1).unwrap();
        assert_eq!((sizes(&s), s.milestones.clone()), (vec![7], vec![7]));
        let s = segment_path(&path(2), 4).unwrap();
        assert_eq!(sizes(&s), vec![1, 1, 1, 1]);
        assert_eq!(s.milestone(3), &Pose::planar(1.0, 0.0, 0.0));
        assert!(segment_path(&path(3), 0).is_err());
    }

    fn sp(lo: usize, hi: usize, m: usize) -> Subproblem {
        Subproblem {
            robots: vec![0, 1],
            base: vec![(lo, hi); 2],
            level: 0,
            segments: m,
        }
    }

    #[test]
    fn adaptation_widens_by_one_segment() {
        let a = adapt_subproblem(&sp(2, 2, 5)).unwrap();
        assert_eq!((a.level, a.window(0)), (1, (1, 3)));
        let a = adapt_subproblem(&sp(0, 0, 5)).unwrap();
        assert_eq!(a.window(1), (0, 1));
        assert_eq!(adapt_subproblem(&sp(0, 0, 1)), Err(CannotAdapt));
        let mut s = sp(1, 1, 3);
        s.level = 1;
        assert_eq!(adapt_subproblem(&s), Err(CannotAdapt));
    }

    #[test]
    fn merging_chains_robots() {
        let a = Subproblem {
            robots: vec![0, 1],
            base: vec![(2, 2), (2, 2)],
            level: 1,
            segments: 5,
        };
        let b = Subproblem {
            robots: vec![1, 2],
            base: vec![(2, 3), (2, 2)],
            level: 0,
            segments: 5,
        };
        let c = a.merge(&b);
        assert_eq!(c.robots, vec![0, 1, 2]);
        assert_eq!(c.base, vec![(2, 2), (2, 3), (2, 2)]);
        assert_eq!(c.level, 1);
    }

    #[test]
    fn single_robot_plans_without_conflicts() {
        let full = build_open_cross(2, ModelKind::Unicycle1).unwrap();
        let mut s = full.clone();
        s.robots.truncate(1);
        let sol = plan(&s, &PlannerParams::default(), 1).unwrap();
        assert_eq!(sol.metrics.conflicts_resolved, 0);
        assert!(validate_solution(&s, &sol.trajectories).is_valid());
    }

    #[test]
    fn open_cross_swap_resolves_conflicts() {
        let s = build_open_cross(2, ModelKind::Unicycle1).unwrap();
        let mut records = vec![];
        let sol = plan_logged(&s, &PlannerParams::default(), 3, &mut |r| records.push(r.clone())).unwrap();
        assert!(sol.metrics.conflicts_resolved >= 1);
        assert_eq!(sol.metrics.conflicts_resolved, sol.metrics.rung_total());
        assert!(validate_solution(&s, &sol.trajectories).is_valid());
        assert!(!records.is_empty());
    }
}

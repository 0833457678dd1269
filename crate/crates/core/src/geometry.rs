//! Convex-body distance and free-space queries.
//!
//! Planar bodies are stored with `z = 0` so that a single GJK implementation
//! serves both the 2D and 3D workspaces.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = Vector3<f64>;

/// Distances below this are reported as exact contact.
const CONTACT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate polytope: need at least {needed} affinely independent vertices, got {got}")]
    Degenerate { needed: usize, got: usize },
    #[error("non-finite vertex coordinate")]
    NonFinite,
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch(Dim, Dim),
    #[error("workspace bounds are empty")]
    EmptyBounds,
    #[error("obstacle {0} does not intersect the workspace bounds")]
    ObstacleOutsideBounds(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dim {
    Planar,
    Spatial,
}

impl Dim {
    pub fn count(self) -> usize {
        match self {
            Dim::Planar => 2,
            Dim::Spatial => 3,
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Signed shortest difference `a - b` on the circle.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// Placement of a body frame in the workspace.
///
/// Planar poses only use `yaw`; spatial poses compose `Rz(yaw) Ry(pitch) Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Point,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn planar(x: f64, y: f64, theta: f64) -> Self {
        Self {
            translation: Point::new(x, y, 0.0),
            roll: 0.0,
            pitch: 0.0,
            yaw: normalize_angle(theta),
        }
    }

    pub fn spatial(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            translation: Point::new(x, y, z),
            roll: normalize_angle(roll),
            pitch: normalize_angle(pitch),
            yaw: normalize_angle(yaw),
        }
    }

    pub fn identity() -> Self {
        Self::planar(0.0, 0.0, 0.0)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        if self.roll == 0.0 && self.pitch == 0.0 {
            let (s, c) = self.yaw.sin_cos();
            Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
        } else {
            *Rotation3::from_euler_angles(self.roll, self.pitch, self.yaw).matrix()
        }
    }

    pub fn transform(&self, p: &Point) -> Point {
        self.rotation() * p + self.translation
    }
}

/// A bounded convex polytope given by its extreme points in the body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolytope {
    dim: Dim,
    vertices: Vec<Point>,
    radius: f64,
}

impl ConvexPolytope {
    /// Builds a polytope from a point cloud, discarding any point that is not a vertex
    /// of the convex hull.
    pub fn new(dim: Dim, points: Vec<Point>) -> Result<Self, GeometryError> {
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite);
        }
        let needed = dim.count() + 1;
        let vertices = match dim {
            Dim::Planar => {
                let flat: Vec<Point> = points.iter().map(|p| Point::new(p.x, p.y, 0.0)).collect();
                planar_hull(&flat)
            }
            Dim::Spatial => spatial_extreme_points(&points),
        };
        if vertices.len() < needed || !full_dimensional(dim, &vertices) {
            return Err(GeometryError::Degenerate {
                needed,
                got: vertices.len(),
            });
        }
        let radius = vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(Self {
            dim,
            vertices,
            radius,
        })
    }

    pub fn planar(points: &[[f64; 2]]) -> Result<Self, GeometryError> {
        Self::new(
            Dim::Planar,
            points.iter().map(|p| Point::new(p[0], p[1], 0.0)).collect(),
        )
    }

    pub fn spatial(points: &[[f64; 3]]) -> Result<Self, GeometryError> {
        Self::new(
            Dim::Spatial,
            points.iter().map(|p| Point::new(p[0], p[1], p[2])).collect(),
        )
    }

    /// Axis-aligned rectangle centered on the body origin.
    pub fn rectangle(width: f64, height: f64) -> Result<Self, GeometryError> {
        let (hx, hy) = (width / 2.0, height / 2.0);
        Self::planar(&[[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]])
    }

    /// Axis-aligned box centered on the body origin.
    pub fn cuboid(sx: f64, sy: f64, sz: f64) -> Result<Self, GeometryError> {
        let (hx, hy, hz) = (sx / 2.0, sy / 2.0, sz / 2.0);
        let mut pts = Vec::with_capacity(8);
        for &x in &[-hx, hx] {
            for &y in &[-hy, hy] {
                for &z in &[-hz, hz] {
                    pts.push([x, y, z]);
                }
            }
        }
        Self::spatial(&pts)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Radius of the smallest origin-centered ball containing the body.
    pub fn circumradius(&self) -> f64 {
        self.radius
    }

    pub fn world_vertices(&self, pose: &Pose) -> Vec<Point> {
        let r = pose.rotation();
        self.vertices
            .iter()
            .map(|v| r * v + pose.translation)
            .collect()
    }
}

/// Andrew's monotone chain; collinear points are dropped. Output is counter-clockwise.
fn planar_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Point, a: &Point, b: &Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// A point is extreme iff it lies strictly outside the hull of the remaining points.
fn spatial_extreme_points(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.dedup();
    let mut kept: Vec<Point> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        if kept.iter().any(|q| (q - p).norm() == 0.0) {
            continue;
        }
        let others: Vec<Point> = pts
            .iter()
            .enumerate()
            .filter(|(j, q)| *j != i && (*q - p).norm() > 0.0)
            .map(|(_, q)| *q)
            .collect();
        if others.is_empty() || gjk_distance(std::slice::from_ref(p), &others) > 1e-10 {
            kept.push(*p);
        }
    }
    kept
}

fn full_dimensional(dim: Dim, v: &[Point]) -> bool {
    let scale = v.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let eps = 1e-12 * scale * scale;
    match dim {
        Dim::Planar => v.len() >= 3,
        Dim::Spatial => {
            let o = v[0];
            for a in v.iter().skip(1) {
                for b in v.iter().skip(1) {
                    let n = (a - o).cross(&(b - o));
                    if n.norm() <= eps {
                        continue;
                    }
                    if v.iter().any(|c| n.dot(&(c - o)).abs() > eps * scale) {
                        return true;
                    }
                }
            }
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

/// A polytope fixed in the workspace, with its world-frame vertices cached.
#[derive(Debug, Clone)]
pub struct Obstacle {
    shape: ConvexPolytope,
    pose: Pose,
    world: Vec<Point>,
    center: Point,
    radius: f64,
}

impl Obstacle {
    pub fn new(shape: ConvexPolytope, pose: Pose) -> Self {
        let world = shape.world_vertices(&pose);
        let center = world.iter().fold(Point::zeros(), |acc, p| acc + p) / world.len() as f64;
        let radius = world.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
        Self {
            shape,
            pose,
            world,
            center,
            radius,
        }
    }

    pub fn shape(&self) -> &ConvexPolytope {
        &self.shape
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn world_vertices(&self) -> &[Point] {
        &self.world
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    dim: Dim,
    bounds: Aabb,
    obstacles: Vec<Obstacle>,
}

impl Workspace {
    pub fn new(dim: Dim, bounds: Aabb, obstacles: Vec<Obstacle>) -> Result<Self, GeometryError> {
        let axes = dim.count();
        if (0..axes).any(|a| !(bounds.min[a] < bounds.max[a])) {
            return Err(GeometryError::EmptyBounds);
        }
        for (i, o) in obstacles.iter().enumerate() {
            if o.shape.dim() != dim {
                return Err(GeometryError::DimensionMismatch(o.shape.dim(), dim));
            }
            let inside = (0..axes).all(|a| {
                let lo = o.world.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
                let hi = o.world.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
                hi >= bounds.min[a] && lo <= bounds.max[a]
            });
            if !inside {
                return Err(GeometryError::ObstacleOutsideBounds(i));
            }
        }
        Ok(Self {
            dim,
            bounds,
            obstacles,
        })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    /// Signed distance by which every point stays inside the bounds box.
    fn bounds_margin(&self, pts: &[Point]) -> f64 {
        let axes = self.dim.count();
        let mut m = f64::INFINITY;
        for p in pts {
            for a in 0..axes {
                m = m.min(p[a] - self.bounds.min[a]).min(self.bounds.max[a] - p[a]);
            }
        }
        m
    }
}

/// Euclidean distance between two posed convex polytopes; zero when they touch or overlap.
pub fn min_distance(
    a: &ConvexPolytope,
    pose_a: &Pose,
    b: &ConvexPolytope,
    pose_b: &Pose,
) -> Result<f64, GeometryError> {
    if a.dim() != b.dim() {
        return Err(GeometryError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(gjk_distance(&a.world_vertices(pose_a), &b.world_vertices(pose_b)))
}

/// Minimum of obstacle distances and the inside-bounds margin. Negative when a vertex
/// leaves the bounds box.
pub fn clearance(body: &ConvexPolytope, pose: &Pose, workspace: &Workspace) -> f64 {
    let pts = body.world_vertices(pose);
    let mut best = workspace.bounds_margin(&pts);
    let center = pose.translation;
    for o in &workspace.obstacles {
        let lower = (o.center - center).norm() - o.radius - body.circumradius();
        if lower >= best {
            continue;
        }
        best = best.min(gjk_distance(&pts, &o.world));
    }
    best
}

pub fn in_free_space(body: &ConvexPolytope, pose: &Pose, workspace: &Workspace) -> bool {
    clearance(body, pose, workspace) > 0.0
}

/// Softmin of the bounds margin and all obstacle distances with smoothing `width`.
/// Never exceeds [`clearance`].
pub fn soft_clearance(body: &ConvexPolytope, pose: &Pose, workspace: &Workspace, width: f64) -> f64 {
    let pts = body.world_vertices(pose);
    let bounds = workspace.bounds_margin(&pts);
    let center = pose.translation;
    let mut terms: Vec<f64> = Vec::with_capacity(workspace.obstacles.len() + 1);
    terms.push(bounds);
    let mut best = bounds;
    let cutoff = 40.0 * width;
    for o in &workspace.obstacles {
        let lower = (o.center - center).norm() - o.radius - body.circumradius();
        if lower > best + cutoff {
            continue;
        }
        let d = gjk_distance(&pts, &o.world);
        best = best.min(d);
        terms.push(d);
    }
    let sum: f64 = terms.iter().map(|d| (-(d - best) / width).exp()).sum();
    best - width * sum.ln()
}

fn support(points: &[Point], dir: &Point) -> Point {
    let mut best = points[0];
    let mut best_dot = best.dot(dir);
    for p in &points[1..] {
        let d = p.dot(dir);
        if d > best_dot {
            best_dot = d;
            best = *p;
        }
    }
    best
}

/// GJK distance between the convex hulls of two world-frame point sets.
pub(crate) fn gjk_distance(a: &[Point], b: &[Point]) -> f64 {
    let mut simplex: Vec<Point> = Vec::with_capacity(4);
    // Roundoff in the Minkowski difference grows with the coordinates' magnitude.
    let scale = a.iter().chain(b).map(|p| p.amax()).fold(1.0, f64::max);
    let eps = CONTACT_EPS * scale;
    let mut v = a[0] - b[0];
    if v.norm_squared() <= eps * eps {
        return 0.0;
    }
    for _ in 0..128 {
        let w = support(a, &(-v)) - support(b, &v);
        let vv = v.norm_squared();
        // No further progress toward the origin.
        if vv - v.dot(&w) <= 1e-14 * vv.max(1e-300) {
            break;
        }
        if simplex.iter().any(|s| (s - w).norm_squared() <= 1e-28 * vv.max(1.0)) {
            break;
        }
        simplex.push(w);
        let (closest, reduced) = closest_on_simplex(&simplex);
        simplex = reduced;
        v = closest;
        if simplex.len() == 4 || v.norm_squared() <= eps * eps {
            return 0.0;
        }
    }
    let d = v.norm();
    if d <= eps {
        0.0
    } else {
        d
    }
}

/// Closest point to the origin on the hull of up to four points, together with the
/// minimal subset of points supporting it.
fn closest_on_simplex(s: &[Point]) -> (Point, Vec<Point>) {
    let n = s.len();
    let mut best: Option<(f64, Point, u32)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let Some(lambda) = barycentric_projection(s, &idx) else {
            continue;
        };
        if lambda.iter().any(|&l| l <= 0.0) {
            continue;
        }
        let p = idx
            .iter()
            .zip(&lambda)
            .fold(Point::zeros(), |acc, (&i, &l)| acc + s[i] * l);
        let d = p.norm_squared();
        let better = match &best {
            None => true,
            Some((bd, _, bm)) => d < *bd - 1e-30 || (d <= *bd && mask.count_ones() < bm.count_ones()),
        };
        if better {
            best = Some((d, p, mask));
        }
    }
    match best {
        Some((_, p, mask)) => (
            p,
            (0..n).filter(|i| mask & (1 << i) != 0).map(|i| s[i]).collect(),
        ),
        // Only reachable with a fully degenerate simplex; fall back to the nearest vertex.
        None => {
            let p = *s
                .iter()
                .min_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
                .unwrap();
            (p, vec![p])
        }
    }
}

/// Barycentric coordinates of the origin's projection onto the affine hull of `s[idx]`.
fn barycentric_projection(s: &[Point], idx: &[usize]) -> Option<Vec<f64>> {
    match idx.len() {
        1 => Some(vec![1.0]),
        2 => {
            let (a, b) = (s[idx[0]], s[idx[1]]);
            let ab = b - a;
            let den = ab.norm_squared();
            if den <= 1e-300 {
                return None;
            }
            let t = -a.dot(&ab) / den;
            Some(vec![1.0 - t, t])
        }
        k => {
            // Solve the normal equations for the edge vectors relative to the first point.
            let a = s[idx[0]];
            let e: Vec<Point> = idx[1..].iter().map(|&i| s[i] - a).collect();
            let m = k - 1;
            let mut g = nalgebra::DMatrix::<f64>::zeros(m, m);
            let mut rhs = nalgebra::DVector::<f64>::zeros(m);
            for r in 0..m {
                for c in 0..m {
                    g[(r, c)] = e[r].dot(&e[c]);
                }
                rhs[r] = -a.dot(&e[r]);
            }
            let scale = g.diagonal().max();
            let det = g.determinant();
            if scale <= 1e-300 || det.abs() <= 1e-14 * scale.powi(m as i32) {
                return None;
            }
            let t = g.lu().solve(&rhs)?;
            let mut out = Vec::with_capacity(k);
            out.push(1.0 - t.sum());
            out.extend(t.iter().copied());
            Some(out)
        }
    }
}

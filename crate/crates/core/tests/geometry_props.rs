use karc::geometry::{min_distance, ConvexPolytope, Pose};
use proptest::prelude::*;

fn polygon(points: Vec<(f64, f64)>) -> Option<ConvexPolytope> {
    let pts: Vec<[f64; 2]> = points.into_iter().map(|(x, y)| [x, y]).collect();
    ConvexPolytope::planar(&pts).ok()
}

fn world(poly: &ConvexPolytope, pose: &Pose) -> Vec<(f64, f64)> {
    poly.world_vertices(pose).iter().map(|p| (p.x, p.y)).collect()
}

fn seg_point(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (cx * cx + cy * cy).sqrt()
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Convex hull vertices come out counter-clockwise, so containment is a sign test.
fn inside(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    (0..poly.len()).all(|i| orient(poly[i], poly[(i + 1) % poly.len()], p) >= 0.0)
}

/// Independent oracle: closest points of disjoint convex polygons always include a vertex.
fn brute_force_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.iter().any(|&p| inside(b, p)) || b.iter().any(|&p| inside(a, p)) {
        return 0.0;
    }
    let edges = |poly: &[(f64, f64)]| -> Vec<((f64, f64), (f64, f64))> {
        (0..poly.len())
            .map(|i| (poly[i], poly[(i + 1) % poly.len()]))
            .collect()
    };
    let (ea, eb) = (edges(a), edges(b));
    for &(p, q) in &ea {
        for &(r, s) in &eb {
            if segments_cross(p, q, r, s) {
                return 0.0;
            }
        }
    }
    let mut best = f64::INFINITY;
    for &p in a {
        for &(r, s) in &eb {
            best = best.min(seg_point(r, s, p));
        }
    }
    for &p in b {
        for &(r, s) in &ea {
            best = best.min(seg_point(r, s, p));
        }
    }
    best
}

fn point_cloud() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..9)
}

fn pose() -> impl Strategy<Value = (f64, f64, f64)> {
    (-3.0f64..3.0, -3.0f64..3.0, -3.2f64..3.2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_brute_force_oracle(a in point_cloud(), b in point_cloud(), pa in pose(), pb in pose()) {
        let (Some(a), Some(b)) = (polygon(a), polygon(b)) else { return Ok(()) };
        let (pa, pb) = (Pose::planar(pa.0, pa.1, pa.2), Pose::planar(pb.0, pb.1, pb.2));
        let d = min_distance(&a, &pa, &b, &pb).unwrap();
        let oracle = brute_force_distance(&world(&a, &pa), &world(&b, &pb));
        prop_assert!((d - oracle).abs() <= 1e-6, "gjk {} oracle {}", d, oracle);
    }

    #[test]
    fn symmetric(a in point_cloud(), b in point_cloud(), pa in pose(), pb in pose()) {
        let (Some(a), Some(b)) = (polygon(a), polygon(b)) else { return Ok(()) };
        let (pa, pb) = (Pose::planar(pa.0, pa.1, pa.2), Pose::planar(pb.0, pb.1, pb.2));
        let d1 = min_distance(&a, &pa, &b, &pb).unwrap();
        let d2 = min_distance(&b, &pb, &a, &pa).unwrap();
        prop_assert!((d1 - d2).abs() <= 1e-12);
    }

    #[test]
    fn invariant_under_common_rigid_motion(
        a in point_cloud(), b in point_cloud(), pa in pose(), pb in pose(),
        (tx, ty, rot) in (-5.0f64..5.0, -5.0f64..5.0, -3.2f64..3.2),
    ) {
        let (Some(a), Some(b)) = (polygon(a), polygon(b)) else { return Ok(()) };
        let moved = |p: (f64, f64, f64)| {
            let (s, c) = rot.sin_cos();
            Pose::planar(c * p.0 - s * p.1 + tx, s * p.0 + c * p.1 + ty, p.2 + rot)
        };
        let d1 = min_distance(&a, &Pose::planar(pa.0, pa.1, pa.2), &b, &Pose::planar(pb.0, pb.1, pb.2)).unwrap();
        let d2 = min_distance(&a, &moved(pa), &b, &moved(pb)).unwrap();
        prop_assert!((d1 - d2).abs() <= 1e-9, "{} vs {}", d1, d2);
    }

    #[test]
    fn translating_apart_never_decreases_distance(
        a in point_cloud(), b in point_cloud(), pb in pose(), step in 0.0f64..2.0,
    ) {
        // Point-symmetric bodies: the line of centers then never points against the
        // separating direction.
        let mirror = |v: Vec<(f64, f64)>| v.iter().flat_map(|&(x, y)| [(x, y), (-x, -y)]).collect::<Vec<_>>();
        let (Some(a), Some(b)) = (polygon(mirror(a)), polygon(mirror(b))) else { return Ok(()) };
        let pa = Pose::planar(0.0, 0.0, 0.0);
        let norm = (pb.0 * pb.0 + pb.1 * pb.1).sqrt();
        prop_assume!(norm > 1e-3);
        let (ux, uy) = (pb.0 / norm, pb.1 / norm);
        let near = min_distance(&a, &pa, &b, &Pose::planar(pb.0, pb.1, pb.2)).unwrap();
        let far = min_distance(&a, &pa, &b, &Pose::planar(pb.0 + step * ux, pb.1 + step * uy, pb.2)).unwrap();
        prop_assert!(far + 1e-9 >= near, "{} < {}", far, near);
    }
}

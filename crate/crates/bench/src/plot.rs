//! Top-down SVG rendering of a scenario and its trajectories.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use karc::dynamics::{position, StitchedTrajectory};
use karc::scenario::Scenario;

const SCALE: f64 = 100.0;
const COLORS: [&str; 8] = ["#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#9a6324"];

/// Convex hull in counter-clockwise order.
fn hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut h: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = h.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while h.len() >= start + 2 && cross(h[h.len() - 2], h[h.len() - 1], p) <= 0.0 {
                h.pop();
            }
            h.push(p);
        }
        h.pop();
    }
    h
}

/// Renders the workspace bounds, obstacles (projected onto the ground plane), one
/// polyline per robot and start and goal markers. Output depends only on the inputs.
pub fn render_svg(scenario: &Scenario, trajectories: &[StitchedTrajectory]) -> String {
    let b = scenario.workspace.bounds();
    let (w, h) = ((b.max[0] - b.min[0]) * SCALE, (b.max[1] - b.min[1]) * SCALE);
    let px = |x: f64, y: f64| ((x - b.min[0]) * SCALE, (b.max[1] - y) * SCALE);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(s, r##"<rect class="bounds" x="0" y="0" width="{w:.1}" height="{h:.1}" fill="#202020" stroke="black"/>"##);
    for o in scenario.workspace.obstacles() {
        let pts = hull(o.world_vertices().iter().map(|p| [p[0], p[1]]).collect());
        let list: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = px(p[0], p[1]);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(s, r##"<polygon class="obstacle" points="{}" fill="#808080"/>"##, list.join(" "));
    }
    for (r, (spec, traj)) in scenario.robots.iter().zip(trajectories).enumerate() {
        let color = COLORS[r % COLORS.len()];
        let list: Vec<String> = traj
            .states()
            .iter()
            .map(|x| {
                let p = position(&spec.model, x);
                let (x, y) = px(p[0], p[1]);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="path" data-robot="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            spec.id,
            list.join(" ")
        );
    }
    for (r, spec) in scenario.robots.iter().enumerate() {
        let color = COLORS[r % COLORS.len()];
        let (sx, sy) = {
            let p = position(&spec.model, &spec.start);
            px(p[0], p[1])
        };
        let (gx, gy) = {
            let p = position(&spec.model, &spec.goal);
            px(p[0], p[1])
        };
        let _ = writeln!(s, r#"<circle class="start" cx="{sx:.2}" cy="{sy:.2}" r="5" fill="{color}"/>"#);
        let _ = writeln!(
            s,
            r#"<circle class="goal" cx="{gx:.2}" cy="{gy:.2}" r="{:.2}" fill="none" stroke="{color}" stroke-dasharray="4 2"/>"#,
            spec.alpha * SCALE
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(scenario: &Scenario, trajectories: &[StitchedTrajectory], path: &Path) -> io::Result<()> {
    std::fs::write(path, render_svg(scenario, trajectories))
}

use std::f64::consts::PI;

use karc::dynamics::{
    derivative, feasibility_residual, step, Control, ModelKind, RobotModel, State, Trajectory,
};
use proptest::prelude::*;

fn model(kind: u8) -> RobotModel {
    match kind % 3 {
        0 => RobotModel::unicycle1(),
        1 => RobotModel::unicycle2(),
        _ => RobotModel::quadrotor2(),
    }
}

fn sample(bounds: (&[f64], &[f64]), unit: &[f64]) -> Vec<f64> {
    bounds
        .0
        .iter()
        .zip(bounds.1)
        .zip(unit)
        .map(|((lo, hi), s)| lo + (hi - lo) * s)
        .collect()
}

fn state_for(m: &RobotModel, raw: &[f64]) -> Vec<f64> {
    (0..m.state_dim()).map(|i| 4.0 * raw[i] - 2.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn jacobians_match_central_differences(
        kind in 0u8..3,
        raw_x in prop::collection::vec(0.0f64..1.0, 12),
        raw_u in prop::collection::vec(0.0f64..1.0, 4),
    ) {
        let m = model(kind);
        let x = state_for(&m, &raw_x);
        let cb = &m.control_bounds;
        let u = sample((&cb.lo, &cb.hi), &raw_u[..m.control_dim()]);
        let j = m.jacobians(&x, &u);
        let h = 1e-6;
        let n = m.state_dim();
        for c in 0..n {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[c] += h;
            xm[c] -= h;
            let (fp, fm) = (derivative(&m, &xp, &u).unwrap(), derivative(&m, &xm, &u).unwrap());
            for r in 0..n {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                let a = j.dx(r, c);
                prop_assert!((a - fd).abs() / 1f64.max(a.abs()).max(fd.abs()) < 1e-6,
                    "{:?} df{}/dx{}: {} vs {}", m.kind, r, c, a, fd);
            }
        }
        for c in 0..m.control_dim() {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[c] += h;
            um[c] -= h;
            let (fp, fm) = (derivative(&m, &x, &up).unwrap(), derivative(&m, &x, &um).unwrap());
            for r in 0..n {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                let a = j.du(r, c);
                prop_assert!((a - fd).abs() / 1f64.max(a.abs()).max(fd.abs()) < 1e-6);
            }
        }
    }

    #[test]
    fn step_keeps_angles_in_range_and_matches_euler(
        kind in 0u8..3,
        raw_x in prop::collection::vec(0.0f64..1.0, 12),
        raw_u in prop::collection::vec(0.0f64..1.0, 4),
        dt in 0.05f64..0.5,
    ) {
        let m = model(kind);
        let mut x = state_for(&m, &raw_x);
        for &i in m.kind.angle_indices() {
            x[i] *= 1.5;
        }
        let cb = &m.control_bounds;
        let u = sample((&cb.lo, &cb.hi), &raw_u[..m.control_dim()]);
        let next = step(&m, &x, &u, dt).unwrap();
        let f = derivative(&m, &x, &u).unwrap();
        for i in 0..m.state_dim() {
            let raw = x[i] + dt * f[i];
            if m.kind.angle_indices().contains(&i) {
                prop_assert!(next[i] > -PI && next[i] <= PI);
                let wrapped = (next[i] - raw) / (2.0 * PI);
                prop_assert!((wrapped - wrapped.round()).abs() < 1e-9);
            } else {
                prop_assert_eq!(next[i], raw);
            }
        }
    }

    #[test]
    fn rollouts_have_zero_residual(
        kind in 0u8..3,
        raw_us in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 1..20),
        dt in 0.05f64..0.5,
    ) {
        let m = model(kind);
        let cb = &m.control_bounds;
        let controls: Vec<Control> = raw_us
            .iter()
            .map(|r| Control(sample((&cb.lo, &cb.hi), &r[..m.control_dim()])))
            .collect();
        let start = State(vec![0.1; m.state_dim()]);
        let traj = Trajectory::rollout(&m, start, controls, dt).unwrap();
        prop_assert_eq!(feasibility_residual(&m, &traj), 0.0);
    }
}

#[test]
fn model_kinds_round_trip_through_names() {
    for k in [ModelKind::Unicycle1, ModelKind::Unicycle2, ModelKind::Quadrotor2] {
        assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        assert!(RobotModel::default_for(k).validate().is_ok());
    }
}

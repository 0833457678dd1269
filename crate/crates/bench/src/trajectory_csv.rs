//! Trajectory files: one row per knot, with each robot's piece layout in a leading
//! comment so the pieces and their timesteps round-trip exactly.

use std::io::{self, Write};

use karc::dynamics::{Control, ModelKind, State, StitchedTrajectory, Trajectory};
use karc::scenario::Scenario;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryCsvError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed trajectory file: {0}")]
    Format(String),
}

pub fn state_names(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Unicycle1 => &["x", "y", "theta"],
        ModelKind::Unicycle2 => &["x", "y", "theta", "v", "omega"],
        ModelKind::Quadrotor2 => &["x", "y", "z", "roll", "pitch", "yaw", "vx", "vy", "vz", "p", "q", "r"],
    }
}

pub fn control_names(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Unicycle1 => &["v", "omega"],
        ModelKind::Unicycle2 => &["a", "alpha"],
        ModelKind::Quadrotor2 => &["thrust", "tau_roll", "tau_pitch", "tau_yaw"],
    }
}

fn layout(traj: &StitchedTrajectory) -> String {
    traj.pieces
        .iter()
        .map(|p| format!("{}x{}", p.len() - 1, p.dt))
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes all robots' trajectories. Controls are blank on each robot's final row.
pub fn write_trajectories<W: Write>(mut out: W, scenario: &Scenario, trajectories: &[StitchedTrajectory]) -> Result<(), TrajectoryCsvError> {
    let kind = scenario.robots[0].model.kind;
    for (spec, traj) in scenario.robots.iter().zip(trajectories) {
        writeln!(out, "# robot={} model={} pieces={}", spec.id, spec.model.kind.name(), layout(traj))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["robot_id", "k", "t_seconds"];
    header.extend(state_names(kind));
    header.extend(control_names(kind));
    w.write_record(&header)?;
    for (spec, traj) in scenario.robots.iter().zip(trajectories) {
        let states = traj.states();
        let times = traj.knot_times();
        let controls: Vec<&Control> = traj.pieces.iter().flat_map(|p| &p.controls).collect();
        for (k, x) in states.iter().enumerate() {
            let mut row = vec![spec.id.clone(), k.to_string(), times[k].to_string()];
            row.extend(x.iter().map(f64::to_string));
            match controls.get(k) {
                Some(u) => row.extend(u.iter().map(f64::to_string)),
                None => row.extend(std::iter::repeat_n(String::new(), spec.model.control_dim())),
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_layout(text: &str) -> Result<Vec<(usize, f64)>, TrajectoryCsvError> {
    let bad = || TrajectoryCsvError::Format(format!("bad piece layout {text:?}"));
    text.split(';')
        .map(|p| {
            let (n, dt) = p.split_once('x').ok_or_else(bad)?;
            Ok((n.parse().map_err(|_| bad())?, dt.parse().map_err(|_| bad())?))
        })
        .collect()
}

/// Reads trajectories written by [`write_trajectories`], in scenario robot order.
pub fn read_trajectories(text: &str, scenario: &Scenario) -> Result<Vec<StitchedTrajectory>, TrajectoryCsvError> {
    let mut layouts: Vec<Option<Vec<(usize, f64)>>> = vec![None; scenario.len()];
    let index = |id: &str| {
        scenario
            .robots
            .iter()
            .position(|r| r.id == id)
            .ok_or_else(|| TrajectoryCsvError::Format(format!("unknown robot {id:?}")))
    };
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let mut id = None;
        let mut pieces = None;
        for field in line.trim_start_matches('#').split_whitespace() {
            if let Some(v) = field.strip_prefix("robot=") {
                id = Some(v);
            } else if let Some(v) = field.strip_prefix("pieces=") {
                pieces = Some(parse_layout(v)?);
            }
        }
        if let (Some(id), Some(p)) = (id, pieces) {
            layouts[index(id)?] = Some(p);
        }
    }
    let mut states: Vec<Vec<State>> = vec![vec![]; scenario.len()];
    let mut controls: Vec<Vec<Control>> = vec![vec![]; scenario.len()];
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    for record in reader.records() {
        let record = record?;
        let r = index(&record[0])?;
        let model = &scenario.robots[r].model;
        let (n, m) = (model.state_dim(), model.control_dim());
        if record.len() < 3 + n + m {
            return Err(TrajectoryCsvError::Format("row too short".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| TrajectoryCsvError::Format(format!("bad number {s:?}")));
        let x = (3..3 + n).map(|i| num(&record[i])).collect::<Result<Vec<_>, _>>()?;
        states[r].push(State(x));
        if !record[3 + n].is_empty() {
            let u = (3 + n..3 + n + m).map(|i| num(&record[i])).collect::<Result<Vec<_>, _>>()?;
            controls[r].push(Control(u));
        }
    }
    let mut out = Vec::with_capacity(scenario.len());
    for r in 0..scenario.len() {
        let layout = layouts[r]
            .take()
            .ok_or_else(|| TrajectoryCsvError::Format(format!("no piece layout for robot {}", scenario.robots[r].id)))?;
        let total: usize = layout.iter().map(|p| p.0).sum();
        if states[r].len() != total + 1 || controls[r].len() != total {
            return Err(TrajectoryCsvError::Format(format!("robot {} rows do not match its layout", scenario.robots[r].id)));
        }
        let mut pieces = vec![];
        let mut o = 0;
        for (len, dt) in layout {
            pieces.push(Trajectory {
                states: states[r][o..=o + len].to_vec(),
                controls: controls[r][o..o + len].to_vec(),
                dt,
            });
            o += len;
        }
        out.push(StitchedTrajectory { pieces });
    }
    Ok(out)
}

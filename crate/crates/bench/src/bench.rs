//! Trial runner: plans a scenario with one method over consecutive seeds, gates every
//! success on the validator and writes per-trial artifacts plus a metrics table.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use karc::dynamics::{ModelKind, StitchedTrajectory};
use karc::planner::{plan_logged, PlannerParams};
use karc::sampling::{plan_composite_rrt, plan_decoupled_rrt, Query};
use karc::scenario::{
    build_cluttered_cross, build_open_cross, build_quadrotor_cross, build_quadrotor_inlet, load_scenario, Scenario,
    ScenarioError,
};
use karc::solution::path_cost;
use karc::timeline::MovingObstacles;
use karc::validate::validate_solution;
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::metrics::{write_metrics, TrialRecord};
use crate::plot::emit_plot;
use crate::trajectory_csv::{write_trajectories, TrajectoryCsvError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryCsvError),
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Karc,
    DecoupledRrt,
    CompositeRrt,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Karc, Method::DecoupledRrt, Method::CompositeRrt];

    pub fn name(self) -> &'static str {
        match self {
            Method::Karc => "karc",
            Method::DecoupledRrt => "decoupled-rrt",
            Method::CompositeRrt => "composite-rrt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected karc, decoupled-rrt or composite-rrt)"))
    }
}

/// A scenario family with its size and model, or a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    Builder { name: String, robots: usize, model: ModelKind },
    File(PathBuf),
}

pub const BUILDERS: [&str; 4] = ["open-cross", "cluttered-cross", "quadrotor-cross", "quadrotor-inlet"];

impl ScenarioSource {
    /// Builder names are taken as such; anything else is a path.
    pub fn parse(spec: &str, robots: usize, model: ModelKind) -> Self {
        if BUILDERS.contains(&spec) {
            ScenarioSource::Builder {
                name: spec.to_string(),
                robots,
                model,
            }
        } else {
            ScenarioSource::File(spec.into())
        }
    }

    pub fn build(&self) -> Result<Scenario, BenchError> {
        Ok(match self {
            ScenarioSource::Builder { name, robots, model } => match name.as_str() {
                "open-cross" => build_open_cross(*robots, *model)?,
                "cluttered-cross" => build_cluttered_cross(*robots, *model)?,
                "quadrotor-cross" => build_quadrotor_cross(*robots)?,
                "quadrotor-inlet" => build_quadrotor_inlet()?,
                other => return Err(BenchError::Config(format!("unknown scenario builder {other:?}"))),
            },
            ScenarioSource::File(path) => load_scenario(path)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub scenario: ScenarioSource,
    pub method: Method,
    pub trials: usize,
    pub base_seed: u64,
    pub timeout_s: f64,
    pub out: PathBuf,
    /// Planner, optimizer and sampler parameters; the timeout above overrides
    /// `params.timeout_s`.
    pub params: PlannerParams,
    pub workers: usize,
}

impl BenchmarkConfig {
    pub fn check(&self) -> Result<(), BenchError> {
        if self.trials == 0 {
            return Err(BenchError::Config("at least one trial is required".into()));
        }
        if !(self.timeout_s > 0.0) {
            return Err(BenchError::Config("timeout must be positive".into()));
        }
        Ok(())
    }
}

/// One planner run, without any file output.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectories: Option<Vec<StitchedTrajectory>>,
    pub runtime_s: f64,
    pub conflicts: Option<usize>,
    /// Line-delimited log records.
    pub log: Vec<serde_json::Value>,
}

/// Runs `method` once and gates a success on the validator.
pub fn run_method(scenario: &Scenario, method: Method, params: &PlannerParams, seed: u64) -> RunOutcome {
    let mut log = vec![];
    let started = Instant::now();
    let result: Result<(Vec<StitchedTrajectory>, Option<usize>), String> = match method {
        Method::Karc => plan_logged(scenario, params, seed, &mut |rec| {
            log.push(json!({ "event": "segment", "record": rec }));
        })
        .map(|s| (s.trajectories, Some(s.metrics.conflicts_resolved)))
        .map_err(|f| f.error.to_string()),
        Method::DecoupledRrt | Method::CompositeRrt => {
            let models: Vec<_> = scenario.robots.iter().map(|r| &r.model).collect();
            let queries: Vec<Query> = scenario
                .robots
                .iter()
                .map(|r| Query::new(r.start.clone(), r.goal.clone(), r.alpha))
                .collect();
            let obstacles = MovingObstacles::none(scenario.d_min);
            let deadline = Some(started + Duration::from_secs_f64(params.timeout_s.min(1e9)));
            let ws = &scenario.workspace;
            let planned = if method == Method::DecoupledRrt {
                let order: Vec<usize> = (0..scenario.len()).collect();
                plan_decoupled_rrt(ws, &models, &queries, &order, &obstacles, seed, &params.rrt, deadline)
            } else {
                plan_composite_rrt(ws, &models, &queries, &obstacles, seed, &params.rrt, deadline)
            };
            planned
                .map(|t| (t.into_iter().map(StitchedTrajectory::new).collect(), None))
                .map_err(|e| e.to_string())
        }
    };
    let runtime_s = started.elapsed().as_secs_f64();
    let (trajectories, conflicts) = match result {
        Ok((t, c)) => {
            let report = validate_solution(scenario, &t);
            if report.is_valid() {
                (Some(t), c)
            } else {
                log.push(json!({ "event": "rejected", "violations": report.to_string() }));
                (None, None)
            }
        }
        Err(e) => {
            log.push(json!({ "event": "failed", "error": e }));
            (None, None)
        }
    };
    log.push(json!({
        "event": "result",
        "method": method.name(),
        "seed": seed,
        "success": trajectories.is_some(),
        "runtime_s": runtime_s,
        "path_cost_s": trajectories.as_deref().map(path_cost),
        "conflicts": conflicts,
    }));
    RunOutcome {
        trajectories,
        runtime_s,
        conflicts,
        log,
    }
}

/// Writes `trajectories.csv`, `plot.svg` (both only on success) and `run_log.jsonl`.
pub fn write_artifacts(dir: &Path, scenario: &Scenario, outcome: &RunOutcome) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    if let Some(t) = &outcome.trajectories {
        let path = dir.join("trajectories.csv");
        let file = File::create(&path).map_err(io_at(&path))?;
        write_trajectories(BufWriter::new(file), scenario, t)?;
        let path = dir.join("plot.svg");
        emit_plot(scenario, t, &path).map_err(io_at(&path))?;
    }
    let path = dir.join("run_log.jsonl");
    let mut w = BufWriter::new(File::create(&path).map_err(io_at(&path))?);
    for line in &outcome.log {
        writeln!(w, "{line}").map_err(io_at(&path))?;
    }
    w.flush().map_err(io_at(&path))
}

pub fn method_dir(out: &Path, scenario: &Scenario, method: Method) -> PathBuf {
    out.join(&scenario.name).join(method.name())
}

/// Runs every trial (seed `base_seed + t`), writes artifacts under
/// `<out>/<scenario>/<method>/trial_<t>/` and the metrics table next to them.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<Vec<TrialRecord>, BenchError> {
    config.check()?;
    let scenario = config.scenario.build()?;
    let dir = method_dir(&config.out, &scenario, config.method);
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let metrics_path = dir.join("metrics.csv");
    File::create(&metrics_path).map_err(io_at(&metrics_path))?;
    let mut params = config.params.clone();
    params.timeout_s = config.timeout_s;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let records: Vec<Result<TrialRecord, BenchError>> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let seed = config.base_seed.wrapping_add(t as u64);
                let outcome = run_method(&scenario, config.method, &params, seed);
                write_artifacts(&dir.join(format!("trial_{t}")), &scenario, &outcome)?;
                Ok(TrialRecord {
                    method: config.method.name().into(),
                    scenario: scenario.name.clone(),
                    robots: scenario.len(),
                    trial: t,
                    seed,
                    success: outcome.trajectories.is_some(),
                    runtime_s: outcome.runtime_s,
                    path_cost_s: outcome.trajectories.as_deref().map(path_cost),
                    conflicts: outcome.conflicts,
                })
            })
            .collect()
    });
    let records = records.into_iter().collect::<Result<Vec<_>, _>>()?;
    let file = File::create(&metrics_path).map_err(io_at(&metrics_path))?;
    write_metrics(BufWriter::new(file), &records)?;
    Ok(records)
}

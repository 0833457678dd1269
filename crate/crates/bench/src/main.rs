use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use karc::dynamics::ModelKind;
use karc::planner::PlannerParams;
use karc::scenario::save_scenario;
use karc::validate::validate_solution;
use karc_bench::bench::{method_dir, run_benchmark, run_method, write_artifacts, BenchmarkConfig, Method, ScenarioSource};
use karc_bench::metrics::aggregate;
use karc_bench::overrides::{apply_overrides, split_overrides};
use karc_bench::trajectory_csv::read_trajectories;

/// Multi-robot kinodynamic planning.
///
/// Parameters can be overridden with dotted flags: `--opt.<field>` (optimizer),
/// `--rrt.<field>` (kinodynamic sampler), `--kin.<field>` (kinematic sampler) and
/// `--planner.<field>`.
#[derive(Parser)]
#[command(name = "karc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario with one method and seed; writes trajectories, plot and log.
    Plan {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the trial protocol and write metrics.csv plus per-trial artifacts.
    Bench {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Seed of the first trial; trial t uses seed + t.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Check a trajectory file against a scenario.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        trajectories: PathBuf,
    },
    /// Build a scenario and save it as JSON.
    Scenario {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Builder name (open-cross, cluttered-cross, quadrotor-cross, quadrotor-inlet) or a
    /// scenario JSON file.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 4)]
    robots: usize,
    /// unicycle1 or unicycle2, for the ground-robot families.
    #[arg(long, default_value = "unicycle1", value_parser = parse_model)]
    model: ModelKind,
}

impl ScenarioArgs {
    fn source(&self) -> ScenarioSource {
        ScenarioSource::parse(&self.scenario, self.robots, self.model)
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "karc")]
    method: Method,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long = "timeout-s", default_value_t = 600.0)]
    timeout_s: f64,
}

impl RunArgs {
    fn params(&self, overrides: &[(String, String)]) -> Result<PlannerParams> {
        let mut p = apply_overrides(&PlannerParams::default(), overrides).map_err(anyhow::Error::msg)?;
        if let Some(m) = self.segments {
            p.segments = m;
        }
        p.timeout_s = self.timeout_s;
        Ok(p)
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    [ModelKind::Unicycle1, ModelKind::Unicycle2, ModelKind::Quadrotor2]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown model {s:?}"))
}

fn main() -> Result<ExitCode> {
    let (overrides, args) = split_overrides(std::env::args().collect()).map_err(anyhow::Error::msg)?;
    let cli = Cli::parse_from(args);
    match cli.command {
        Command::Plan { scenario, run, seed, out } => {
            let params = run.params(&overrides)?;
            let s = scenario.source().build()?;
            let outcome = run_method(&s, run.method, &params, seed);
            write_artifacts(&out, &s, &outcome)?;
            match &outcome.trajectories {
                Some(_) => {
                    println!("{}: solved in {:.2} s, artifacts in {}", s.name, outcome.runtime_s, out.display());
                    Ok(ExitCode::SUCCESS)
                }
                None => {
                    println!("{}: failed after {:.2} s, log in {}", s.name, outcome.runtime_s, out.display());
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Bench { scenario, run, seed, trials, out, workers } => {
            let config = BenchmarkConfig {
                scenario: scenario.source(),
                method: run.method,
                trials,
                base_seed: seed,
                timeout_s: run.timeout_s,
                out,
                params: run.params(&overrides)?,
                workers,
            };
            let records = run_benchmark(&config)?;
            let a = aggregate(&records);
            let s = config.scenario.build()?;
            println!(
                "{} {}: {}/{} solved, runtime {:.2} ± {:.2} s, metrics in {}",
                s.name,
                config.method,
                a.successes,
                a.trials,
                a.runtime.0,
                a.runtime.1,
                method_dir(&config.out, &s, config.method).join("metrics.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { scenario, trajectories } => {
            let s = scenario.source().build()?;
            let text = fs::read_to_string(&trajectories).with_context(|| trajectories.display().to_string())?;
            let t = read_trajectories(&text, &s)?;
            let report = validate_solution(&s, &t);
            print!("{report}");
            Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Scenario { scenario, out } => {
            if !overrides.is_empty() {
                bail!("parameter overrides do not apply to scenario export");
            }
            let s = scenario.source().build()?;
            save_scenario(&s, &out)?;
            println!("wrote {} to {}", s.name, out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

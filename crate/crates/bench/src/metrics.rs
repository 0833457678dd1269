//! Per-trial records and the metrics CSV.

use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: String,
    pub scenario: String,
    pub robots: usize,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub runtime_s: f64,
    /// Absent on failure.
    pub path_cost_s: Option<f64>,
    pub conflicts: Option<usize>,
}

/// Mean and sample standard deviation of the successful trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub successes: usize,
    pub trials: usize,
    pub runtime: (f64, f64),
    pub path_cost: (f64, f64),
    pub conflicts: (f64, f64),
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate(records: &[TrialRecord]) -> Aggregate {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.success).collect();
    let col = |f: &dyn Fn(&TrialRecord) -> Option<f64>| mean_std(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
    Aggregate {
        successes: ok.len(),
        trials: records.len(),
        runtime: col(&|r| Some(r.runtime_s)),
        path_cost: col(&|r| r.path_cost_s),
        conflicts: col(&|r| r.conflicts.map(|c| c as f64)),
    }
}

pub const HEADER: [&str; 9] = ["method", "scenario", "robots", "trial", "seed", "success", "runtime_s", "path_cost_s", "conflicts"];

/// Writes the trial rows followed by `mean` and `std` rows over the successes; the
/// `success` column of those rows holds the success rate.
pub fn write_metrics<W: Write>(out: W, records: &[TrialRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in records {
        w.write_record([
            r.method.clone(),
            r.scenario.clone(),
            r.robots.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.success.to_string(),
            r.runtime_s.to_string(),
            opt(r.path_cost_s.map(|v| v.to_string())),
            opt(r.conflicts.map(|v| v.to_string())),
        ])?;
    }
    if let Some(first) = records.first() {
        let a = aggregate(records);
        let rate = a.successes as f64 / a.trials as f64;
        let num = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
        for (label, pick) in [("mean", 0), ("std", 1)] {
            let get = |p: (f64, f64)| num(if pick == 0 { p.0 } else { p.1 });
            w.write_record([
                first.method.clone(),
                first.scenario.clone(),
                first.robots.to_string(),
                label.to_string(),
                String::new(),
                rate.to_string(),
                get(a.runtime),
                get(a.path_cost),
                get(a.conflicts),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

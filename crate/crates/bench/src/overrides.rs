//! Dotted parameter overrides such as `--opt.beta1 0.2` or `--rrt.dt=0.05`.

use karc::planner::PlannerParams;
use serde_json::Value;

/// Flag prefixes and the parameter group each one addresses; `planner` is the top level.
const GROUPS: [(&str, Option<&str>); 4] = [
    ("opt", Some("optimizer")),
    ("rrt", Some("rrt")),
    ("kin", Some("kinematic")),
    ("planner", None),
];

fn is_override(arg: &str) -> bool {
    GROUPS.iter().any(|(p, _)| arg.strip_prefix("--").and_then(|a| a.strip_prefix(p)).is_some_and(|r| r.starts_with('.')))
}

/// Splits the command line into dotted overrides (`(key, value)` with the leading dashes
/// removed) and the remaining arguments.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<(String, String)>, Vec<String>), String> {
    let mut overrides = vec![];
    let mut rest = vec![];
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        if !is_override(&arg) {
            rest.push(arg);
            continue;
        }
        let body = &arg[2..];
        match body.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| format!("missing value for --{body}"))?;
                overrides.push((body.to_string(), v));
            }
        }
    }
    Ok((overrides, rest))
}

/// Applies overrides to `params`. Values are read as JSON when they parse as JSON and
/// as plain strings otherwise; unknown keys are errors.
pub fn apply_overrides(params: &PlannerParams, overrides: &[(String, String)]) -> Result<PlannerParams, String> {
    let mut doc = serde_json::to_value(params).map_err(|e| e.to_string())?;
    for (key, raw) in overrides {
        let (prefix, field) = key.split_once('.').ok_or_else(|| format!("malformed override {key:?}"))?;
        let group = GROUPS
            .iter()
            .find(|(p, _)| *p == prefix)
            .ok_or_else(|| format!("unknown parameter group {prefix:?}"))?
            .1;
        let target = match group {
            Some(g) => &mut doc[g],
            None => &mut doc,
        };
        let slot = target
            .as_object_mut()
            .and_then(|o| o.get_mut(field))
            .ok_or_else(|| format!("unknown parameter {key:?}"))?;
        *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
    }
    serde_json::from_value(doc).map_err(|e| format!("invalid override: {e}"))
}

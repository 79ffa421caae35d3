//! TOML experiment files.
//!
//! ```toml
//! schema_version = 1
//! T_grid = [256, 512, 1024]
//! trials_per_T = 200
//! theta_grid = [0.5, 1.0, 2.0]
//! base_seed = 0
//! output_path = "out/thm1.csv"      # optional
//!
//! [problem]
//! d = 5
//! mu = 1.0
//! L = 4.0
//! Q = 1.0
//! rotation_seed = 0                 # optional
//! interior = false                  # optional
//! feasible = { kind = "ball", radius = 1.0 }
//!
//! [schedule]
//! kind = "thm1"                     # prop_original, prop_interior, thm2,
//!                                   # generalized_r (r = ..), exponential (alpha = ..)
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::harness::ExperimentConfig;
use crate::problems::ProblemParams;
use crate::schedules::ScheduleKind;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub problem: ProblemParams,
    pub schedule: ScheduleKind,
    #[serde(rename = "T_grid")]
    pub t_grid: Vec<usize>,
    #[serde(rename = "trials_per_T")]
    pub trials_per_t: usize,
    #[serde(default)]
    pub theta_grid: Vec<f64>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl From<ConfigFile> for ExperimentConfig {
    fn from(c: ConfigFile) -> Self {
        ExperimentConfig {
            problem: c.problem,
            schedule: c.schedule,
            t_grid: c.t_grid,
            trials_per_t: c.trials_per_t,
            theta_grid: c.theta_grid,
            base_seed: c.base_seed,
            output_path: c.output_path,
        }
    }
}

impl From<&ExperimentConfig> for ConfigFile {
    fn from(c: &ExperimentConfig) -> Self {
        ConfigFile {
            schema_version: SCHEMA_VERSION,
            problem: c.problem.clone(),
            schedule: c.schedule,
            t_grid: c.t_grid.clone(),
            trials_per_t: c.trials_per_t,
            theta_grid: c.theta_grid.clone(),
            base_seed: c.base_seed,
            output_path: c.output_path.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source_name: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.source_name, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(source_name: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { source_name: source_name.to_string(), message: message.into() }
}

/// Parse `key=value`. Values are read as TOML literals, falling back to a bare string.
pub fn parse_override(s: &str) -> Result<(String, Value), String> {
    let (key, raw) = s.split_once('=').ok_or_else(|| format!("override `{s}` is not of the form key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(format!("override `{s}` has an empty key"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn apply_override(table: &mut Table, key: &str, value: Value) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| format!("override `{key}`: `{p}` is not a table"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parse a config document; `source_name` labels diagnostics.
pub fn parse_config(text: &str, source_name: &str, overrides: &[(String, Value)]) -> Result<ConfigFile, ConfigError> {
    let parsed: ConfigFile = if overrides.is_empty() {
        // direct parse keeps line and column information in errors
        toml::from_str(text).map_err(|e| err(source_name, e.to_string()))?
    } else {
        let mut table: Table = toml::from_str(text).map_err(|e| err(source_name, e.to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v.clone()).map_err(|m| err(source_name, m))?;
        }
        table.try_into().map_err(|e: toml::de::Error| err(source_name, format!("after overrides: {e}")))?
    };
    if parsed.schema_version != SCHEMA_VERSION {
        return Err(err(
            source_name,
            format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", parsed.schema_version),
        ));
    }
    Ok(parsed)
}

pub fn load_config(path: &Path, overrides: &[(String, Value)]) -> Result<ConfigFile, ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| err(&name, e.to_string()))?;
    parse_config(&text, &name, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
T_grid = [16, 32]
trials_per_T = 3
theta_grid = [1.0]

[problem]
d = 2
mu = 1.0
L = 2.0
Q = 1.0
feasible = { kind = "ball", radius = 1.0 }

[schedule]
kind = "thm1"
"#;

    #[test]
    fn parses_minimal_config() {
        let c = parse_config(MINIMAL, "min.toml", &[]).unwrap();
        assert_eq!(c.t_grid, vec![16, 32]);
        assert_eq!(c.schedule, ScheduleKind::Thm1);
        assert_eq!(c.base_seed, 0);
    }

    #[test]
    fn override_changes_only_that_field() {
        let base = parse_config(MINIMAL, "min.toml", &[]).unwrap();
        let ov = vec![parse_override("trials_per_T=1").unwrap()];
        let changed = parse_config(MINIMAL, "min.toml", &ov).unwrap();
        assert_eq!(changed.trials_per_t, 1);
        assert_eq!(ConfigFile { trials_per_t: 3, ..changed }, base);
    }

    #[test]
    fn dotted_override_reaches_nested_tables() {
        let ov = vec![parse_override("problem.Q=0.25").unwrap(), parse_override("schedule.kind=thm2").unwrap()];
        let c = parse_config(MINIMAL, "min.toml", &ov).unwrap();
        assert_eq!(c.problem.q, 0.25);
        assert_eq!(c.schedule, ScheduleKind::Thm2);
    }

    #[test]
    fn bad_schedule_kind_is_reported_with_line() {
        let text = MINIMAL.replace("\"thm1\"", "\"thm9\"");
        let e = parse_config(&text, "bad.toml", &[]).unwrap_err();
        assert!(e.message.contains("thm9"), "{e}");
        assert!(e.message.contains("line"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("trials_per_T = 3", "trials_per_T = 3\ntrails = 4");
        let e = parse_config(&text, "bad.toml", &[]).unwrap_err();
        assert!(e.message.contains("trails"), "{e}");
    }

    #[test]
    fn schema_version_is_checked() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(parse_config(&text, "v2.toml", &[]).is_err());
        let text = MINIMAL.replace("schema_version = 1", "");
        assert!(parse_config(&text, "none.toml", &[]).unwrap_err().message.contains("schema_version"));
    }

    #[test]
    fn malformed_overrides() {
        assert!(parse_override("trials_per_T").is_err());
        assert!(parse_override("=3").is_err());
        assert_eq!(parse_override("output_path=out/a.csv").unwrap().1, Value::String("out/a.csv".into()));
    }

    #[test]
    fn roundtrips_through_toml() {
        let c = parse_config(MINIMAL, "min.toml", &[]).unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(parse_config(&text, "rt.toml", &[]).unwrap(), c);
    }
}

use std::path::Path;

use mutator::exactla::Field;
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Table,
}

/// Limits and defaults; read from a JSON file and overridden by flags.
#[derive(Clone, Debug)]
pub struct Config {
    pub max_points: u64,
    pub max_group: u64,
    pub max_subspaces: u64,
    pub default_field: Field,
    pub format: Format,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            max_points: mutator::census::MAX_POINTS,
            max_group: mutator::groups::DEFAULT_BUDGET,
            max_subspaces: mutator::groups::DEFAULT_BUDGET,
            default_field: Field::Prime(2),
            format: Format::Json,
            seed: 0,
        }
    }
}

pub fn parse_field(s: &str) -> Result<Field, CliError> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("q") {
        return Ok(Field::Rationals);
    }
    let p = s
        .strip_prefix("GF:")
        .or_else(|| s.strip_prefix("gf:"))
        .and_then(|p| p.parse::<u32>().ok())
        .ok_or_else(|| CliError::usage(format!("field must be Q or GF:p, got {s:?}")))?;
    Field::gf(p).map_err(CliError::from)
}

pub fn parse_format(s: &str) -> Result<Format, CliError> {
    match s {
        "json" => Ok(Format::Json),
        "table" => Ok(Format::Table),
        _ => Err(CliError::usage(format!("format must be json or table, got {s:?}"))),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let mut c = Config::default();
        let budget = |k: &str, dst: &mut u64| -> Result<(), CliError> {
            if let Some(x) = v.get(k) {
                *dst = x.as_u64().filter(|&b| b > 0).ok_or_else(|| CliError::usage(format!("config: {k} must be a positive integer")))?;
            }
            Ok(())
        };
        budget("max_points", &mut c.max_points)?;
        budget("max_group", &mut c.max_group)?;
        budget("max_subspaces", &mut c.max_subspaces)?;
        if let Some(x) = v.get("seed") {
            c.seed = x.as_u64().ok_or_else(|| CliError::usage("config: seed must be a nonnegative integer"))?;
        }
        if let Some(x) = v.get("default_field") {
            c.default_field = parse_field(x.as_str().ok_or_else(|| CliError::usage("config: default_field must be a string"))?)?;
        }
        if let Some(x) = v.get("format") {
            c.format = parse_format(x.as_str().ok_or_else(|| CliError::usage("config: format must be a string"))?)?;
        }
        Ok(c)
    }

    /// Bound used for each exhaustive enumeration inside a stability check.
    pub fn enumeration_budget(&self) -> u64 {
        self.max_group.min(self.max_subspaces)
    }
}

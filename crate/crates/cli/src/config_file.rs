//! Config-file handling: TOML with one section per module, strict unknown-key
//! rejection, `key.path=value` overrides layered on top, and an echo of the
//! fully-resolved config for provenance. Re-parsing an echoed config yields
//! the identical resolved config.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use l2t_core::orchestrator::ExperimentConfig;

/// Parses `path`, applies `overrides` (each `section.key=value`), resolves
/// derived defaults, and validates every invariant.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    parse_config_str(&text, overrides)
        .with_context(|| format!("in config file {}", path.display()))
}

pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = text.parse().context("config is not valid TOML")?;
    for entry in overrides {
        apply_override(&mut table, entry)?;
    }
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| anyhow!("{e}"))?;
    let cfg = cfg.resolve();
    cfg.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(cfg)
}

/// Serializes the resolved config in the same file format.
pub fn echo_config(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string_pretty(cfg).context("serializing resolved config")
}

fn apply_override(table: &mut toml::Table, entry: &str) -> Result<()> {
    let (path, raw_value) = entry
        .split_once('=')
        .ok_or_else(|| anyhow!("override '{entry}' is not of the form section.key=value"))?;
    let segments: Vec<&str> = path.trim().split('.').collect();
    if segments.len() < 2 || segments.iter().any(|s| s.is_empty()) {
        bail!("override key '{path}' must be a dotted path like env.alpha");
    }
    // Interpret the value as TOML so numbers, booleans and arrays work;
    // fall back to a plain string (e.g. algorithm names).
    let value: toml::Value = match format!("v = {}", raw_value.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw_value.trim().to_string()),
    };
    let mut cursor = table;
    for seg in &segments[..segments.len() - 1] {
        cursor = cursor
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("override key '{path}': '{seg}' is not a section"))?;
    }
    cursor.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

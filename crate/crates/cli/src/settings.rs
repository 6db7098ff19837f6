use std::fs;
use std::path::{Path, PathBuf};

use igpo_core::trainer::{EnvConfig, ExperimentConfig, PolicyConfig, TrainConfig, WarmupConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Contents of an experiment file; every key is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub label: String,
    pub output_dir: PathBuf,
    pub train: TrainConfig,
    pub environment: EnvConfig,
    pub policy: PolicyConfig,
    pub warmup: WarmupConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            label: "igpo".into(),
            output_dir: PathBuf::from("runs/igpo"),
            train: TrainConfig::default(),
            environment: EnvConfig::default(),
            policy: PolicyConfig::default(),
            warmup: WarmupConfig::default(),
        }
    }
}

const SECTIONS: [&str; 4] = ["train", "environment", "policy", "warmup"];

impl Settings {
    pub fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            train: self.train.clone(),
            environment: self.environment.clone(),
            policy: self.policy.clone(),
            warmup: self.warmup.clone(),
        }
    }

    /// Reads `path` (or starts from the defaults when `None`) and applies
    /// `key=value` overrides before validating.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read settings file `{}`: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {}", p.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        for raw in overrides {
            apply_override(&mut table, raw)?;
        }
        check_keys(&table)?;
        let settings: Self = toml::Value::Table(table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| {
                CliError::Config(locate_bad_key(&table).unwrap_or_else(|| e.message().to_string()))
            })?;
        settings.config().validate()?;
        Ok(settings)
    }

    /// The resolved settings as TOML, every key spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("settings serializes")
    }
}

fn check_keys(table: &toml::Table) -> Result<(), CliError> {
    for (key, value) in table {
        if key == "label" || key == "output_dir" {
            continue;
        }
        if !SECTIONS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        let sub = value
            .as_table()
            .ok_or_else(|| CliError::Config(format!("`{key}` must be a table")))?;
        if let Some(field) = sub.keys().find(|f| !key_known(key, f)) {
            return Err(CliError::Config(format!("unknown key `{key}.{field}`")));
        }
    }
    Ok(())
}

/// Names the first key whose value alone fails to deserialize.
fn locate_bad_key(table: &toml::Table) -> Option<String> {
    let defaults = toml::Value::try_from(Settings::default()).ok()?;
    let mut base = defaults.as_table()?.clone();
    for (key, value) in table {
        let fields: Vec<(String, toml::Value)> = match value.as_table() {
            Some(sub) => sub.iter().map(|(f, v)| (format!("{key}.{f}"), v.clone())).collect(),
            None => vec![(key.clone(), value.clone())],
        };
        for (path, v) in fields {
            let mut trial = base.clone();
            match path.split_once('.') {
                Some((s, f)) => {
                    trial.get_mut(s)?.as_table_mut()?.insert(f.to_string(), v);
                }
                None => {
                    trial.insert(path.clone(), v);
                }
            }
            if let Err(e) = toml::Value::Table(trial.clone()).try_into::<Settings>() {
                return Some(format!("`{path}`: {}", e.message()));
            }
            base = trial;
        }
    }
    None
}

fn key_known(section: &str, key: &str) -> bool {
    let defaults = toml::Value::try_from(Settings::default()).expect("defaults serialize");
    defaults
        .get(section)
        .and_then(|s| s.as_table())
        .is_some_and(|t| t.contains_key(key))
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// `section.key=value`; a bare `key=value` is accepted when exactly one
/// section has that key.
pub fn apply_override(table: &mut toml::Table, raw: &str) -> Result<(), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{raw}` is not key=value")))?;
    let key = key.trim();
    let value = parse_value(value.trim());
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => (s.to_string(), f.to_string()),
        None if key == "label" || key == "output_dir" => {
            table.insert(key.to_string(), value);
            return Ok(());
        }
        None => {
            let owners: Vec<&str> = SECTIONS.iter().copied().filter(|s| key_known(s, key)).collect();
            match owners.as_slice() {
                [one] => (one.to_string(), key.to_string()),
                [] => return Err(CliError::Config(format!("unknown key `{key}`"))),
                _ => {
                    return Err(CliError::Config(format!(
                        "key `{key}` is ambiguous; use one of {}",
                        owners
                            .iter()
                            .map(|s| format!("{s}.{key}"))
                            .collect::<Vec<_>>()
                            .join(", ")
                    )))
                }
            }
        }
    };
    if !SECTIONS.contains(&section.as_str()) {
        return Err(CliError::Config(format!("unknown section `{section}` in `{key}`")));
    }
    if !key_known(&section, &field) {
        return Err(CliError::Config(format!("unknown key `{section}.{field}`")));
    }
    let entry = table
        .entry(section.clone())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let sub = entry
        .as_table_mut()
        .ok_or_else(|| CliError::Config(format!("`{section}` must be a table")))?;
    sub.insert(field, value);
    Ok(())
}

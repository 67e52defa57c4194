use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

/// Option values from a JSON config file. Keys are long flag names with
/// either dashes or underscores.
#[derive(Default)]
pub struct ConfigFile {
    values: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        match serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))? {
            Value::Object(values) => Ok(Self { values }),
            _ => anyhow::bail!("{} must hold a JSON object", path.display()),
        }
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        let dashed = key.replace('_', "-");
        let Some(v) = self.values.get(key).or_else(|| self.values.get(&dashed)) else {
            return Ok(None);
        };
        serde_json::from_value(v.clone())
            .map(Some)
            .with_context(|| format!("config key `{key}`"))
    }

    /// Flag value if given, else the config value, else `default`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }
}

//! Config files: TOML tables with dotted `key=value` overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::CliError;

/// Raw configuration: the parsed file (if any) plus overrides.
pub struct RawConfig {
    /// Original text, used for line-accurate diagnostics when nothing was
    /// overridden.
    source: Option<String>,
    pub table: Table,
    pub overridden: bool,
}

impl RawConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let (source, mut table) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                let table = text.parse::<Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                (Some(text), table)
            }
            None => (None, Table::new()),
        };
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{o}` is not of the form key=value")))?;
            set_dotted(&mut table, key.trim(), parse_value(value.trim()))?;
        }
        Ok(RawConfig { source, table, overridden: !overrides.is_empty() })
    }

    /// Deserialize into the command's typed configuration.
    pub fn typed<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        match (&self.source, self.overridden) {
            (Some(text), false) => toml::from_str(text).map_err(|e| CliError::Config(e.to_string())),
            _ => {
                let text = toml::to_string(&self.table).map_err(|e| CliError::Config(e.to_string()))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{e}(line numbers refer to the configuration after overrides)")))
            }
        }
    }
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(v: &str) -> Value {
    format!("x = {v}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| Value::String(v.to_string()))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("invalid override key `{key}`")));
    }
    let mut cur = table;
    for (i, p) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(CliError::Config(format!("override `{key}`: `{}` is not a table", parts[..=i].join("."))));
            }
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Fully resolved configuration, defaults included, as TOML text.
pub fn snapshot<T: Serialize>(cfg: &T) -> Result<String, CliError> {
    toml::to_string(cfg).map_err(|e| CliError::Internal(anyhow::anyhow!("cannot serialise configuration: {e}")))
}

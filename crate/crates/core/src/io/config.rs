//! Flat `key=value` run records.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Resolved settings of one run, one `key=value` per line in key order.
/// Values are stored as text; floats should be inserted through their
/// `Display` form, which reads back exactly.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        let mut c = Self::default();
        c.entries.insert("command".into(), command.into());
        c
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> Result<()> {
        let value = value.to_string();
        if key.is_empty() || key.contains(['=', '\n', '\r']) || key.trim() != key {
            return Err(Error::InvalidArgument(format!("invalid config key {key:?}")));
        }
        if value.contains(['\n', '\r']) {
            return Err(Error::InvalidArgument(format!("config value for {key} spans lines")));
        }
        self.entries.insert(key.into(), value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::InvalidArgument(format!("config has no {key}")))?;
        raw.parse()
            .map_err(|_| Error::InvalidArgument(format!("config {key}={raw} does not parse")))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Parses [`RunConfig::to_text`] output. Blank lines and `#` comments are
    /// skipped; values run from the first `=` to the end of the line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format("config", format!("line {} has no '='", n + 1)))?;
            if c.entries.contains_key(k) {
                return Err(Error::format("config", format!("duplicate key {k}")));
            }
            c.set(k, v)?;
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::from(e).in_file(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_text(&text).map_err(|e| e.in_file(path))
    }
}

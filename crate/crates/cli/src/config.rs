//! `key = value` run configuration.
//!
//! One entry per line, `#` starts a comment, keys are lowercase with `.` and
//! `_`. Every key must be consumed by the command; leftovers are reported
//! with their line numbers.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config")?;
        if let Some(l) = self.line {
            write!(f, " line {l}")?;
        }
        if let Some(k) = &self.field {
            write!(f, ", field `{k}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeSet<String>>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '.' || c == '_')
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    field: None,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if !valid_key(k) {
                return Err(ConfigError {
                    line: Some(line),
                    field: Some(k.to_string()),
                    message: "keys use lowercase letters, digits, `.` and `_`".into(),
                });
            }
            if v.is_empty() {
                return Err(ConfigError {
                    line: Some(line),
                    field: Some(k.to_string()),
                    message: "empty value".into(),
                });
            }
            if let Some(prev) = entries.get(k) {
                let prev: &Entry = prev;
                return Err(ConfigError {
                    line: Some(line),
                    field: Some(k.to_string()),
                    message: format!("duplicate key (first set on line {})", prev.line),
                });
            }
            entries.insert(
                k.to_string(),
                Entry {
                    value: v.to_string(),
                    line,
                },
            );
        }
        Ok(Config {
            entries,
            used: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        Ok(Self::parse(&text)?)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.line_of(key),
            field: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        let e = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(&e.value)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| self.error(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated numbers, optionally of a fixed length.
    pub fn list(&self, key: &str, len: Option<usize>) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.str(key) else {
            return Ok(None);
        };
        let items: Vec<f64> = v
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| self.error(key, format!("cannot parse `{}`: {e}", s.trim())))
            })
            .collect::<Result<_, _>>()?;
        if let Some(n) = len {
            if items.len() != n {
                return Err(self.error(
                    key,
                    format!("expected {n} comma-separated numbers, got {}", items.len()),
                ));
            }
        }
        Ok(Some(items))
    }

    /// Errors on the first key no command asked for.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        let mut unused: Vec<(&String, &Entry)> = self
            .entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .collect();
        unused.sort_by_key(|(_, e)| e.line);
        match unused.first() {
            None => Ok(()),
            Some((k, e)) => Err(ConfigError {
                line: Some(e.line),
                field: Some(k.to_string()),
                message: "unknown or unused field for this command".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_reports_lines() {
        let c = Config::parse("# run\npreset = two-photon-chi09\n\ngrid.points = 200 # dense\n")
            .unwrap();
        assert_eq!(c.str("preset"), Some("two-photon-chi09"));
        assert_eq!(c.get::<usize>("grid.points").unwrap(), Some(200));
        assert_eq!(c.line_of("grid.points"), Some(4));
        c.finish().unwrap();
    }

    #[test]
    fn diagnostics() {
        let e = Config::parse("a = 1\nnonsense\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = Config::parse("a = 1\na = 2\n").unwrap_err();
        assert!(e.to_string().contains("line 2") && e.to_string().contains("duplicate"));
        let c = Config::parse("x = 1\ngrid.points = many\n").unwrap();
        let e = c.get::<usize>("grid.points").unwrap_err();
        assert!(e.to_string().contains("line 2, field `grid.points`"));
        let e = c.finish().unwrap_err();
        assert_eq!(e.field.as_deref(), Some("x"));
        let c = Config::parse("bounds = 1, 2, 3").unwrap();
        assert!(c.list("bounds", Some(2)).is_err());
    }
}

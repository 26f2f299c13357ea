//! Flat `key = value` configuration files with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("bad value for `{key}`: `{value}`")]
    BadValue { key: String, value: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Ordered key-value map. Later duplicates override earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        let v = self.raw(key).ok_or_else(|| ConfigError::MissingKey(key.to_string()))?;
        v.parse().map_err(|_| ConfigError::BadValue { key: key.to_string(), value: v.to_string() })
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        if self.contains(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError> {
        let v = self.raw(key).ok_or_else(|| ConfigError::MissingKey(key.to_string()))?;
        v.split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| {
                x.parse().map_err(|_| ConfigError::BadValue { key: key.to_string(), value: v.to_string() })
            })
            .collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// `key=value` lines in sorted key order.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Hex SHA-256 of [`Config::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Overlays `other` on top of `self`.
    pub fn merged(&self, other: &Config) -> Config {
        let mut out = self.clone();
        for (k, v) in &other.entries {
            out.entries.insert(k.clone(), v.clone());
        }
        out
    }
}

/// Parses `n..m` (exclusive end) or a single seed.
pub fn parse_seed_range(s: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = || ConfigError::BadValue { key: "seeds".into(), value: s.to_string() };
    match s.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b <= a {
                return Err(bad());
            }
            Ok((a..b).collect())
        }
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let c = Config::parse("# header\n alpha = 0.01 # temp\n\nenv=tiger_treasure\n").unwrap();
        assert_eq!(c.get::<f64>("alpha").unwrap(), 0.01);
        assert_eq!(c.raw("env"), Some("tiger_treasure"));
    }

    #[test]
    fn missing_and_bad_values_name_the_key() {
        let c = Config::parse("gamma = abc").unwrap();
        assert!(matches!(c.get::<f64>("alpha"), Err(ConfigError::MissingKey(k)) if k == "alpha"));
        assert!(matches!(c.get::<f64>("gamma"), Err(ConfigError::BadValue { key, .. }) if key == "gamma"));
        assert!(matches!(Config::parse("novalue"), Err(ConfigError::Syntax { line: 1 })));
    }

    #[test]
    fn hash_ignores_order_and_comments() {
        let a = Config::parse("a=1\nb=2").unwrap();
        let b = Config::parse("# x\nb = 2\na = 1").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), Config::parse("a=1\nb=3").unwrap().hash());
    }

    #[test]
    fn lists_and_seed_ranges() {
        let c = Config::parse("k = -1, 0.5 ,1").unwrap();
        assert_eq!(c.get_list::<f64>("k").unwrap(), vec![-1.0, 0.5, 1.0]);
        assert_eq!(parse_seed_range("3..6").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_seed_range("7").unwrap(), vec![7]);
        assert!(parse_seed_range("5..5").is_err());
    }
}

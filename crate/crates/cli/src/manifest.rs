//! Plain-text experiment manifests.
//!
//! One `key = value` per line, `[section]` headers, `#` comments. Keys
//! before the first header are shared by every subcommand, keys under
//! `[graph]` describe the graph source, and keys under a subcommand's name
//! apply to that subcommand only. Command-line flags override the manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Manifest {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let err = |line: usize, message: &str| CliError::Manifest {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        };
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| err(idx + 1, "unterminated section header"))?;
                current = name.trim().to_string();
                if current.is_empty() {
                    return Err(err(idx + 1, "empty section name"));
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err(idx + 1, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(err(idx + 1, "empty key"));
            }
            let section = sections.entry(current.clone()).or_default();
            if section.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(err(idx + 1, &format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::UnreadableFile {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Looks `key` up in `section`, then `[graph]`, then the top level.
    pub fn lookup(&self, section: &str, key: &str) -> Option<&str> {
        [section, "graph", ""]
            .iter()
            .find_map(|s| self.sections.get(*s).and_then(|m| m.get(key)))
            .map(String::as_str)
    }
}

/// Resolves each setting from its flag, the manifest, or a default, and
/// records the winning value so the effective configuration can be hashed.
pub struct Settings {
    manifest: Manifest,
    section: String,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn new(manifest: Manifest, section: &str) -> Self {
        Self {
            manifest,
            section: section.to_string(),
            resolved: BTreeMap::new(),
        }
    }

    fn manifest_value<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.manifest.lookup(&self.section, key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e| CliError::invalid(key, raw, e)),
        }
    }

    /// Resolves a setting that does not affect file contents, such as an
    /// output location, without adding it to the hash.
    pub fn untracked<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.manifest_value(key),
        }
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => self.manifest_value(key)?,
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn required<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.optional(key, flag)?.ok_or_else(|| CliError::MissingInput(key.to_string()))
    }

    pub fn or<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let value = self.optional(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Comma-separated list.
    pub fn list<T: FromStr + Display + Clone>(&mut self, key: &str, flag: Option<Vec<T>>, default: Option<&[T]>) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let values = match flag {
            Some(v) => v,
            None => match self.manifest.lookup(&self.section, key) {
                Some(raw) => raw
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|e| CliError::invalid(key, s, e)))
                    .collect::<Result<_, _>>()?,
                None => default.ok_or_else(|| CliError::MissingInput(key.to_string()))?.to_vec(),
            },
        };
        let joined: Vec<String> = values.iter().map(T::to_string).collect();
        self.resolved.insert(key.to_string(), joined.join(","));
        Ok(values)
    }

    /// [`Settings::list`] that rejects an empty result.
    pub fn nonempty_list<T: FromStr + Display + Clone>(&mut self, key: &str, flag: Option<Vec<T>>, default: Option<&[T]>) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let values = self.list(key, flag, default)?;
        if values.is_empty() {
            return Err(CliError::invalid(key, "", "list must not be empty"));
        }
        Ok(values)
    }

    /// Adds a derived value, such as an input file digest, to the hash.
    pub fn record(&mut self, key: &str, value: impl ToString) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    /// SHA-256 over the subcommand name and every resolved `key = value`.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("[{}]\n", self.section));
        for (k, v) in &self.resolved {
            h.update(format!("{k} = {v}\n"));
        }
        hex(&h.finalize())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

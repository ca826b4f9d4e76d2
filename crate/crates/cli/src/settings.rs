use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// Values from an optional `key=value` config file, overridden by flags.
/// Every resolved value is recorded so the run can log its configuration.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    consumed: BTreeSet<String>,
    resolved: Vec<(String, String)>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parses `key=value` lines; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Data(format!("config line {}: expected key=value, got {line:?}", i + 1)))?;
        if k.trim().is_empty() {
            return Err(CliError::Data(format!("config line {}: empty key", i + 1)));
        }
        out.insert(normalize(k), v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => parse_config(&read_input(p)?)?,
            None => BTreeMap::new(),
        };
        Ok(Settings { file, ..Settings::default() })
    }

    fn from_file<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.consumed.insert(key.to_string());
        match self.file.get(key) {
            Some(raw) => raw.parse().map(Some).map_err(|e| CliError::Data(format!("config key {key}: {e}"))),
            None => Ok(None),
        }
    }

    /// Flag, else config file, else `default`.
    pub fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let from_file = self.from_file(key)?;
        let v = flag.or(from_file).unwrap_or(default);
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    /// Flag, else config file, else absent.
    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let from_file = self.from_file(key)?;
        let v = flag.or(from_file);
        self.resolved.push((key.to_string(), v.as_ref().map_or_else(|| "(none)".to_string(), T::to_string)));
        Ok(v)
    }

    /// Like [`Settings::optional`] for paths, which must exist.
    pub fn input_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
        self.consumed.insert(key.to_string());
        let v = flag.or_else(|| self.file.get(key).map(PathBuf::from));
        if let Some(p) = &v {
            if !p.exists() {
                return Err(CliError::Data(format!("{key}: {} does not exist", p.display())));
            }
        }
        self.resolved.push((key.to_string(), v.as_ref().map_or_else(|| "(none)".to_string(), |p| p.display().to_string())));
        Ok(v)
    }

    pub fn required_input(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
        self.input_path(key, flag)?.ok_or_else(|| CliError::Usage(format!("--{} is required", key.replace('_', "-"))))
    }

    /// Rejects config keys nothing asked for, then logs the resolved
    /// configuration to standard error.
    pub fn finish(&self, command: &str) -> Result<(), CliError> {
        let unknown: Vec<&String> = self.file.keys().filter(|k| !self.consumed.contains(*k)).collect();
        if !unknown.is_empty() {
            return Err(CliError::Data(format!("unknown config keys for {command}: {unknown:?}")));
        }
        eprintln!("requery {command}");
        for (k, v) in &self.resolved {
            eprintln!("  {k} = {v}");
        }
        Ok(())
    }
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

//! Flat `key=value` experiment files.
//!
//! Keys use the flag names with underscores (`duration_us=1000000`). Blank
//! lines and lines starting with `#` are ignored. A flag given on the command
//! line always wins over the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "nodes",
    "profile",
    "base_quality",
    "notch_count",
    "notch_width",
    "asymmetry_noise",
    "seed",
    "slots",
    "beta",
    "top_m",
    "max_share_fraction",
    "duration_us",
    "ss",
    "flows",
    "reeval_period_us",
    "out",
    "trace",
    "src",
    "dst",
    "min_rate",
];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(format!("line {}: unknown key {key:?}", i + 1));
            }
            if values
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(format!("line {}: duplicate key {key:?}", i + 1));
            }
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The command-line value if present, otherwise the file's.
    pub fn pick<T>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::Input(format!("config key {key}: {e}")))
            })
            .transpose()
    }

    pub fn pick_or<T>(&self, cli: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick(cli, key)?.unwrap_or(default))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let c = Config::parse("# run 3\nnodes = 6\n\nseed=42\nprofile=uniform\n").unwrap();
        assert_eq!(c.pick::<usize>(None, "nodes").unwrap(), Some(6));
        assert_eq!(c.pick(Some(3usize), "nodes").unwrap(), Some(3));
        assert_eq!(c.pick_or::<u64>(None, "duration_us", 7).unwrap(), 7);
        assert_eq!(c.raw("profile"), Some("uniform"));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(Config::parse("nodes 4").unwrap_err().contains("line 1"));
        assert!(Config::parse("colour=red")
            .unwrap_err()
            .contains("unknown key"));
        assert!(Config::parse("seed=1\nseed=2")
            .unwrap_err()
            .contains("duplicate"));
        let c = Config::parse("nodes=four").unwrap();
        assert!(matches!(
            c.pick::<usize>(None, "nodes"),
            Err(CliError::Input(_))
        ));
    }
}

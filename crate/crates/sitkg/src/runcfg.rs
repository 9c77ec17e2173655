//! Key=value run configuration and output-directory provenance.
//!
//! A config file holds `key = value` lines (`#` comments allowed); CLI flags
//! override file values. Every run that produces an output directory records
//! its full effective configuration (`config.effective`) and the list of
//! files it wrote (`MANIFEST`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected key=value")]
    Malformed { path: String, line: usize },
    #[error("config key {key}: {message}")]
    BadValue { key: String, message: String },
}

/// Flat key=value configuration, lowest priority in the override chain.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    values: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed {
                    path: path.display().to_string(),
                    line: idx + 1,
                });
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(KvConfig { values })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                message: format!("cannot parse {raw:?}"),
            }),
        }
    }
}

/// Accumulates the effective settings and produced files of one run.
#[derive(Debug, Default)]
pub struct RunRecord {
    settings: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
}

impl RunRecord {
    pub fn new(subcommand: &str) -> Self {
        let mut record = RunRecord::default();
        record.set("subcommand", subcommand);
        record
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.settings.insert(key.to_string(), value.to_string());
    }

    pub fn add_output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    /// Writes `config.effective` and `MANIFEST` into the output directory.
    pub fn persist(&self, dir: &Path) -> Result<(), ConfigError> {
        let io_err = |path: &Path, source: std::io::Error| ConfigError::Io {
            path: path.display().to_string(),
            source,
        };
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let config_path = dir.join("config.effective");
        let mut config_text = String::new();
        for (key, value) in &self.settings {
            config_text.push_str(&format!("{key} = {value}\n"));
        }
        fs::write(&config_path, config_text).map_err(|e| io_err(&config_path, e))?;

        let manifest_path = dir.join("MANIFEST");
        let mut names: Vec<String> = self
            .outputs
            .iter()
            .map(|p| {
                p.strip_prefix(dir)
                    .unwrap_or(p)
                    .display()
                    .to_string()
            })
            .collect();
        names.push("config.effective".to_string());
        names.sort();
        names.dedup();
        let mut manifest_text = String::new();
        for name in names {
            manifest_text.push_str(&name);
            manifest_text.push('\n');
        }
        fs::write(&manifest_path, manifest_text).map_err(|e| io_err(&manifest_path, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let cfg = KvConfig::parse(
            "seed = 7\nmin_overlap=0.5  # threshold\n\n# comment\n",
            Path::new("run.conf"),
        )
        .unwrap();
        assert_eq!(cfg.get("seed"), Some("7"));
        assert_eq!(cfg.get_parsed::<u64>("seed").unwrap(), Some(7));
        assert_eq!(cfg.get_parsed::<f64>("min_overlap").unwrap(), Some(0.5));
        assert_eq!(cfg.get_parsed::<u64>("missing").unwrap(), None);
        assert!(cfg.get_parsed::<u64>("min_overlap").is_err());
    }

    #[test]
    fn malformed_line_is_rejected() {
        assert!(matches!(
            KvConfig::parse("what even is this", Path::new("run.conf")),
            Err(ConfigError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn run_record_persists_config_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut record = RunRecord::new("synth");
        record.set("seed", 1);
        record.add_output(dir.path().join("graph.tsv"));
        record.persist(dir.path()).unwrap();
        let config = fs::read_to_string(dir.path().join("config.effective")).unwrap();
        assert!(config.contains("subcommand = synth"));
        assert!(config.contains("seed = 1"));
        let manifest = fs::read_to_string(dir.path().join("MANIFEST")).unwrap();
        assert!(manifest.contains("graph.tsv"));
        assert!(manifest.contains("config.effective"));
    }
}

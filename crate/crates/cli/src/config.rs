//! Run configuration: defaults, then `ttmc.toml`, then `TTMC_LIMIT_STATES`,
//! then command-line flags.

use std::path::Path;

use serde::Deserialize;
use ttm_core::checker::CheckOptions;
use ttm_core::lts::Limits;

pub const CONFIG_FILE: &str = "ttmc.toml";
pub const LIMIT_ENV: &str = "TTMC_LIMIT_STATES";

/// Rough per-configuration cost used to turn a memory budget into a
/// state cap: the configuration itself plus index and edge overhead.
const BYTES_PER_STATE_OVERHEAD: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub max_states: usize,
    /// Megabytes; `None` is unbounded.
    pub memory_mb: Option<usize>,
    pub workers: usize,
    pub format: Format,
    pub props: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_states: Limits::default().max_states,
            memory_mb: None,
            workers: 1,
            format: Format::Text,
            props: Vec::new(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    limit_states: Option<usize>,
    memory_mb: Option<usize>,
    workers: Option<usize>,
    format: Option<Format>,
    props: Option<Vec<String>>,
}

/// Flag values given on the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub limit_states: Option<usize>,
    pub memory_mb: Option<usize>,
    pub workers: Option<usize>,
    pub format: Option<Format>,
}

impl RunConfig {
    /// Reads `path` if given, else `ttmc.toml` in the working directory
    /// when present.
    pub fn load(path: Option<&Path>, env: Option<String>, flags: &Overrides) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        let file = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?),
            None => std::fs::read_to_string(CONFIG_FILE).ok(),
        };
        if let Some(text) = file {
            let name = path.map_or(CONFIG_FILE.into(), |p| p.display().to_string());
            let f: FileConfig = toml::from_str(&text).map_err(|e| format!("{name}: {e}"))?;
            cfg.max_states = f.limit_states.unwrap_or(cfg.max_states);
            cfg.memory_mb = f.memory_mb.or(cfg.memory_mb);
            cfg.workers = f.workers.unwrap_or(cfg.workers);
            cfg.format = f.format.unwrap_or(cfg.format);
            cfg.props = f.props.unwrap_or_default();
        }
        if let Some(v) = env {
            cfg.max_states = v
                .trim()
                .parse()
                .map_err(|_| format!("{LIMIT_ENV}: expected a positive integer, got `{v}`"))?;
        }
        cfg.max_states = flags.limit_states.unwrap_or(cfg.max_states);
        cfg.memory_mb = flags.memory_mb.or(cfg.memory_mb);
        cfg.workers = flags.workers.unwrap_or(cfg.workers);
        cfg.format = flags.format.unwrap_or(cfg.format);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_states == 0 {
            return Err("state limit must be positive".into());
        }
        if self.memory_mb == Some(0) {
            return Err("memory limit must be positive".into());
        }
        if self.workers == 0 {
            return Err("worker count must be at least 1".into());
        }
        Ok(())
    }

    /// Exploration limits for configurations of `width` slots.
    pub fn limits(&self, width: usize) -> Limits {
        let by_memory = self
            .memory_mb
            .map_or(usize::MAX, |mb| mb * (1 << 20) / (width * 4 + BYTES_PER_STATE_OVERHEAD));
        Limits {
            max_states: self.max_states.min(by_memory.max(1)),
            workers: self.workers,
        }
    }

    pub fn check_options(&self, width: usize) -> CheckOptions {
        CheckOptions {
            limits: self.limits(width),
            ..CheckOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_file_env_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ttmc.toml");
        std::fs::write(&path, "limit_states = 100\nworkers = 3\nformat = \"json\"\nprops = [\"safety\"]\n").unwrap();
        let cfg = RunConfig::load(Some(&path), None, &Overrides::default()).unwrap();
        assert_eq!((cfg.max_states, cfg.workers, cfg.format), (100, 3, Format::Json));
        assert_eq!(cfg.props, vec!["safety"]);

        let cfg = RunConfig::load(Some(&path), Some("50".into()), &Overrides::default()).unwrap();
        assert_eq!(cfg.max_states, 50);

        let flags = Overrides {
            limit_states: Some(7),
            format: Some(Format::Text),
            ..Overrides::default()
        };
        let cfg = RunConfig::load(Some(&path), Some("50".into()), &flags).unwrap();
        assert_eq!((cfg.max_states, cfg.format), (7, Format::Text));
    }

    #[test]
    fn rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ttmc.toml");
        std::fs::write(&path, "workers = 0\n").unwrap();
        assert!(RunConfig::load(Some(&path), None, &Overrides::default()).is_err());
        std::fs::write(&path, "states = 3\n").unwrap();
        assert!(RunConfig::load(Some(&path), None, &Overrides::default()).is_err());
        assert!(RunConfig::load(None, Some("many".into()), &Overrides::default()).is_err());
    }

    #[test]
    fn memory_budget_caps_states() {
        let cfg = RunConfig {
            memory_mb: Some(1),
            ..RunConfig::default()
        };
        let l = cfg.limits(10);
        assert_eq!(l.max_states, (1 << 20) / 200);
    }
}

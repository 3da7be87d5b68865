//! Service configuration: a TOML file, overridden field by field from the
//! command line or `EMOHEAL_*` environment variables.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub index_path: Option<PathBuf>,
    pub scorer_url: Option<String>,
    pub scorer_timeout_ms: u64,
    pub encoder_url: Option<String>,
    pub encoder_timeout_ms: u64,
    /// Replaces every rule's threshold when set.
    pub rule_threshold: Option<f64>,
    pub rules_path: Option<PathBuf>,
    pub weights_path: Option<PathBuf>,
    pub target_path: Option<PathBuf>,
    pub template_path: Option<PathBuf>,
    pub lexicon_path: Option<PathBuf>,
    pub blend: f64,
    pub k: usize,
    pub nprobe: Option<usize>,
    pub feedback_capacity: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            index_path: None,
            scorer_url: None,
            scorer_timeout_ms: 2000,
            encoder_url: None,
            encoder_timeout_ms: 2000,
            rule_threshold: None,
            rules_path: None,
            weights_path: None,
            target_path: None,
            template_path: None,
            lexicon_path: None,
            blend: emoheal_core::journey::DEFAULT_BLEND,
            k: 3,
            nprobe: None,
            feedback_capacity: crate::feedback::DEFAULT_CAPACITY,
        }
    }
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn scorer_timeout(&self) -> Duration {
        Duration::from_millis(self.scorer_timeout_ms)
    }

    pub fn encoder_timeout(&self) -> Duration {
        Duration::from_millis(self.encoder_timeout_ms)
    }
}

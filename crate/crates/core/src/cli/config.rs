use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::chains::Normalizer;
use crate::llmgate::LlmSettings;
use crate::netfetch::FetchOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderName {
    Openai,
    Groq,
    Scripted,
}

/// Partial [`FetchOptions`]; absent keys keep the defaults.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchOverrides {
    pub user_agent: Option<String>,
    pub max_retries: Option<u32>,
    pub backoff_ms: Option<Vec<u64>>,
    pub per_host_delay_ms: Option<u64>,
    pub timeout_ms: Option<u64>,
}

impl FetchOverrides {
    pub fn apply(&self) -> FetchOptions {
        let mut opts = FetchOptions::default();
        if let Some(ua) = &self.user_agent {
            opts.user_agent = ua.clone();
        }
        if let Some(n) = self.max_retries {
            opts.max_retries = n;
        }
        if let Some(b) = &self.backoff_ms {
            opts.backoff = b.iter().map(|ms| Duration::from_millis(*ms)).collect();
        }
        if let Some(ms) = self.per_host_delay_ms {
            opts.per_host_delay = Duration::from_millis(ms);
        }
        if let Some(ms) = self.timeout_ms {
            opts.timeout = Duration::from_millis(ms);
        }
        opts
    }
}

fn default_bound() -> usize {
    4
}

/// Everything a run needs. Relative paths in a config file are resolved
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub sites: Vec<PathBuf>,
    #[serde(default)]
    pub provider: Option<ProviderName>,
    /// Script file for the scripted provider.
    #[serde(default)]
    pub script: Option<PathBuf>,
    /// Override of the hosted provider's API base.
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub settings: Option<LlmSettings>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub gold_path: Option<PathBuf>,
    #[serde(default = "default_bound")]
    pub concurrency_bound: usize,
    #[serde(default)]
    pub fetch: FetchOverrides,
    /// Serve pages from `<dir>/<host>/<path>` instead of the network.
    #[serde(default)]
    pub fixtures_dir: Option<PathBuf>,
    /// Freeze the clock at this instant; request spacing then costs no
    /// real time.
    #[serde(default)]
    pub frozen_clock: Option<DateTime<Utc>>,
    #[serde(default)]
    pub prompts_dir: Option<PathBuf>,
    #[serde(default)]
    pub normalizer: Normalizer,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sites: Vec::new(),
            provider: None,
            script: None,
            base_url: None,
            settings: None,
            output_dir: None,
            gold_path: None,
            concurrency_bound: default_bound(),
            fetch: FetchOverrides::default(),
            fixtures_dir: None,
            frozen_clock: None,
            prompts_dir: None,
            normalizer: Normalizer::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(bytes: &[u8], base: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = serde_json::from_slice(bytes)
            .map_err(|e| CliError::Validation(format!("run config: {e}")))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.sites.iter_mut().for_each(resolve);
        for p in [
            &mut cfg.script,
            &mut cfg.output_dir,
            &mut cfg.gold_path,
            &mut cfg.fixtures_dir,
            &mut cfg.prompts_dir,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_json(&bytes, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.concurrency_bound == 0 {
            return Err(CliError::Validation("concurrency_bound must be at least 1".into()));
        }
        if self.provider == Some(ProviderName::Scripted) && self.script.is_none() {
            return Err(CliError::Validation("the scripted provider needs a script path".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_config_file() {
        let cfg = RunConfig::from_json(
            br#"{"sites":["sites/a.json","/abs/b.json"],"provider":"scripted","script":"s.json",
                 "settings":{"model":"gpt-4o"},"output_dir":"out","fetch":{"per_host_delay_ms":0}}"#,
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(cfg.sites, [PathBuf::from("/cfg/sites/a.json"), PathBuf::from("/abs/b.json")]);
        assert_eq!(cfg.script, Some(PathBuf::from("/cfg/s.json")));
        assert_eq!(cfg.output_dir(), PathBuf::from("/cfg/out"));
        assert_eq!(cfg.concurrency_bound, 4);
        assert_eq!(cfg.settings.unwrap().temperature, 0.7);
        assert_eq!(cfg.fetch.apply().per_host_delay, Duration::ZERO);
    }

    #[test]
    fn validation() {
        let scripted = RunConfig {
            provider: Some(ProviderName::Scripted),
            ..RunConfig::default()
        };
        assert!(matches!(scripted.validate(), Err(CliError::Validation(_))));
        assert!(RunConfig::from_json(br#"{"sitez":[]}"#, Path::new(".")).is_err());
    }
}

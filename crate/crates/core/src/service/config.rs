//! Service configuration, read from a JSON file.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use schemars::JsonSchema;

use super::ServiceError;
use crate::llm::{MockProvider, Provider, RemoteProvider, DEFAULT_MAX_RETRIES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderConfig {
    /// Canned responses from `<digest>.json` files.
    Mock { fixtures_dir: PathBuf },
    /// OpenAI-compatible endpoint. The key is read from the named
    /// environment variable at startup and never written anywhere.
    Remote {
        endpoint: String,
        model: String,
        api_key_env: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_true")]
        json_mode: bool,
    },
}

fn default_timeout() -> u64 {
    60
}

fn default_true() -> bool {
    true
}

fn default_retries() -> u32 {
    DEFAULT_MAX_RETRIES
}

fn default_bind() -> String {
    "127.0.0.1:8080".to_string()
}

fn default_session_dir() -> PathBuf {
    PathBuf::from("sessions")
}

/// A dataset the server offers, by id. `source` points at a dataset source
/// JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DatasetEntry {
    pub id: String,
    pub source: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ServiceConfig {
    pub provider: ProviderConfig,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub datasets: Vec<DatasetEntry>,
    #[serde(default = "default_session_dir")]
    pub session_dir: PathBuf,
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
}

impl ServiceConfig {
    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut config: ServiceConfig = serde_json::from_str(&text)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ProviderConfig::Mock { fixtures_dir } = &mut self.provider {
            fix(fixtures_dir);
        }
        for d in &mut self.datasets {
            fix(&mut d.source);
        }
        fix(&mut self.session_dir);
        if let Some(s) = &mut self.static_dir {
            fix(s);
        }
    }

    pub fn dataset_source(&self, id: &str) -> Result<&Path, ServiceError> {
        self.datasets
            .iter()
            .find(|d| d.id == id)
            .map(|d| d.source.as_path())
            .ok_or_else(|| ServiceError::UnknownDataset(id.to_string()))
    }
}

pub fn build_provider(config: &ProviderConfig) -> Result<Arc<dyn Provider>, ServiceError> {
    match config {
        ProviderConfig::Mock { fixtures_dir } => {
            let mock = MockProvider::from_dir(fixtures_dir).map_err(|e| {
                ServiceError::Config(format!("fixtures {}: {e}", fixtures_dir.display()))
            })?;
            Ok(Arc::new(mock))
        }
        ProviderConfig::Remote {
            endpoint,
            model,
            api_key_env,
            timeout_secs,
            json_mode,
        } => {
            let key = std::env::var(api_key_env).map_err(|_| {
                ServiceError::Config(format!("environment variable {api_key_env} is not set"))
            })?;
            let provider =
                RemoteProvider::new(endpoint, model, key, Duration::from_secs(*timeout_secs))
                    .json_mode(*json_mode);
            Ok(Arc::new(provider))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("mock")).unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            r#"{"provider":{"kind":"mock","fixtures_dir":"mock"},"datasets":[{"id":"seattle","source":"data/source.json"}]}"#,
        )
        .unwrap();
        let config = ServiceConfig::from_file(&path).unwrap();
        assert_eq!(config.max_retries, 2);
        assert_eq!(config.bind, "127.0.0.1:8080");
        assert_eq!(config.dataset_source("seattle").unwrap(), dir.path().join("data/source.json"));
        assert!(matches!(config.dataset_source("x"), Err(ServiceError::UnknownDataset(_))));
        assert!(build_provider(&config.provider).is_ok());
    }

    #[test]
    fn missing_key_is_config_error() {
        let config = ProviderConfig::Remote {
            endpoint: "http://localhost:1".into(),
            model: "m".into(),
            api_key_env: "BIMODAL_TEST_KEY_THAT_IS_NOT_SET".into(),
            timeout_secs: 1,
            json_mode: true,
        };
        let err = build_provider(&config).err().unwrap();
        assert_eq!(err.code(), "config_error");
        assert_eq!(err.exit_code(), 2);
    }
}

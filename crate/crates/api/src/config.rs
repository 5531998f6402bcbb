use std::net::SocketAddr;
use std::path::PathBuf;

use thematica_core::{ProviderConfig, ProviderMode};

pub const BIND_ENV: &str = "THEMATICA_BIND";
pub const PROVIDER_MODE_ENV: &str = "THEMATICA_PROVIDER_MODE";
pub const DATA_DIR_ENV: &str = "THEMATICA_DATA_DIR";
pub const MOCK_SCRIPT_ENV: &str = "THEMATICA_MOCK_SCRIPT";
pub const ENDPOINT_ENV: &str = "THEMATICA_PROVIDER_ENDPOINT";
pub const MODEL_ENV: &str = "THEMATICA_PROVIDER_MODEL";
pub const CREDENTIAL_ENV: &str = "THEMATICA_PROVIDER_CREDENTIAL_ENV";
pub const PROMPT_DIR_ENV: &str = "THEMATICA_PROMPT_DIR";

#[derive(Clone, Debug, PartialEq)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    pub provider_mode: ProviderMode,
    pub data_dir: Option<PathBuf>,
    /// Responses for the mock provider.
    pub mock_script: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Name of the variable that holds the credential, never the credential.
    pub credential_env: Option<String>,
    /// Replacement prompt templates laid out as `<name>/<version>.txt`.
    pub prompt_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            provider_mode: ProviderMode::Mock,
            data_dir: None,
            mock_script: None,
            endpoint: None,
            model: None,
            credential_env: None,
            prompt_dir: None,
        }
    }
}

impl ServerConfig {
    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|key| std::env::var(key).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let mut config = Self::default();
        if let Some(bind) = lookup(BIND_ENV) {
            config.bind = bind.parse().map_err(|e| format!("{BIND_ENV}=`{bind}`: {e}"))?;
        }
        if let Some(mode) = lookup(PROVIDER_MODE_ENV) {
            config.provider_mode = match mode.as_str() {
                "mock" => ProviderMode::Mock,
                "live" => ProviderMode::Live,
                other => return Err(format!("{PROVIDER_MODE_ENV} must be `mock` or `live`, got `{other}`")),
            };
        }
        let set = |key: &str| lookup(key).filter(|s| !s.is_empty());
        config.data_dir = set(DATA_DIR_ENV).map(PathBuf::from);
        config.mock_script = set(MOCK_SCRIPT_ENV).map(PathBuf::from);
        config.endpoint = set(ENDPOINT_ENV);
        config.model = set(MODEL_ENV);
        config.credential_env = set(CREDENTIAL_ENV);
        config.prompt_dir = set(PROMPT_DIR_ENV).map(PathBuf::from);
        Ok(config)
    }

    pub fn provider_config(&self) -> Result<ProviderConfig, String> {
        match self.provider_mode {
            ProviderMode::Mock => Ok(ProviderConfig::mock()),
            ProviderMode::Live => {
                let endpoint = self.endpoint.as_deref().ok_or_else(|| format!("live mode needs {ENDPOINT_ENV}"))?;
                Ok(ProviderConfig {
                    model: self.model.clone(),
                    credential_env: self.credential_env.clone(),
                    ..ProviderConfig::live(endpoint)
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_environment() {
        let env = |key: &str| match key {
            BIND_ENV => Some("0.0.0.0:9000".to_string()),
            PROVIDER_MODE_ENV => Some("live".to_string()),
            DATA_DIR_ENV => Some("/tmp/x".to_string()),
            _ => None,
        };
        let config = ServerConfig::from_lookup(env).unwrap();
        assert_eq!(config.bind.port(), 9000);
        assert_eq!(config.provider_mode, ProviderMode::Live);
        assert_eq!(config.data_dir, Some(PathBuf::from("/tmp/x")));
        assert_eq!(ServerConfig::from_lookup(|_| None).unwrap(), ServerConfig::default());
        assert!(ServerConfig::from_lookup(|k| (k == PROVIDER_MODE_ENV).then(|| "remote".into())).is_err());
        assert!(config.provider_config().is_err());
    }

    #[test]
    fn live_provider_settings() {
        let env = |key: &str| match key {
            PROVIDER_MODE_ENV => Some("live".to_string()),
            ENDPOINT_ENV => Some("http://localhost:9/v1/chat/completions".to_string()),
            MODEL_ENV => Some("small".to_string()),
            CREDENTIAL_ENV => Some("MY_KEY".to_string()),
            _ => None,
        };
        let provider = ServerConfig::from_lookup(env).unwrap().provider_config().unwrap();
        assert_eq!(provider.mode, ProviderMode::Live);
        assert_eq!(provider.model.as_deref(), Some("small"));
        assert_eq!(provider.credential_env.as_deref(), Some("MY_KEY"));
        assert_eq!(provider.max_retries, 2);
    }
}

//! Pieces of the `thematica` binary that are worth testing on their own.

pub mod datadir;
pub mod live;

use std::path::Path;
use std::sync::Arc;

use thematica_api::ServerConfig;
use thematica_core::{MockScript, Provider, ProviderMode};

/// Builds the provider described by `config`, applying prompt overrides.
pub fn provider_from(config: &ServerConfig) -> Result<Provider, String> {
    let provider_config = config.provider_config()?;
    let mut provider = match config.provider_mode {
        ProviderMode::Mock => {
            let script = match &config.mock_script {
                Some(path) => read_mock_script(path)?,
                None => MockScript::default(),
            };
            Provider::mock_with(provider_config, script).map_err(|e| e.to_string())?
        }
        ProviderMode::Live => {
            let backend = live::HttpBackend::from_config(&provider_config)?;
            Provider::live(provider_config, Arc::new(backend)).map_err(|e| e.to_string())?
        }
    };
    if let Some(dir) = &config.prompt_dir {
        provider.registry_mut().override_templates(dir).map_err(|e| e.to_string())?;
    }
    Ok(provider)
}

pub fn read_mock_script(path: &Path) -> Result<MockScript, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

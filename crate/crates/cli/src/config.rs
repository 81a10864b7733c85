//! TOML configuration with one section per stage.
//!
//! ```toml
//! [pipeline]
//! n = 10000
//! k = 10
//! c = 3
//! window = 50
//! seed = 0
//!
//! [service]
//! bind = "127.0.0.1:8080"
//!
//! [endpoints.mistral-7b]
//! base_url = "http://localhost:8000"
//! model_name = "mistral-7b-instruct"
//! api_key_env = "MISTRAL_API_KEY"
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dialex_core::baselines::Hyperparams;
use dialex_core::llm::ModelEndpointConfig;
use dialex_core::vocab::PipelineConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub pipeline: PipelineConfig,
    pub baselines: Hyperparams,
    pub service: ServiceConfig,
    pub endpoints: BTreeMap<String, ModelEndpointConfig>,
}

impl AppConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(AppConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.into(),
            message: e.to_string(),
        })?;
        let config: AppConfig = toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.into(),
            message: e.to_string(),
        })?;
        config.pipeline.validate().map_err(|e| CliError::Config {
            path: path.into(),
            message: e.to_string(),
        })?;
        Ok(config)
    }

    pub fn endpoint(&self, name: &str) -> CliResult<ModelEndpointConfig> {
        self.endpoints
            .get(name)
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("no endpoint `{name}` in the config file")))
    }
}

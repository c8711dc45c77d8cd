use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use catbox_core::CampaignConfig;
use serde::Deserialize;
use thiserror::Error;

pub const ENV_ADDR: &str = "CATBOX_ADDR";
pub const ENV_STORE: &str = "CATBOX_STORE";
pub const ENV_STATIC_DIR: &str = "CATBOX_STATIC_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid listen address `{0}`")]
    Addr(String),
    #[error("invalid default engine config: {0}")]
    Engine(String),
}

/// Contents of the TOML config file; every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub addr: Option<String>,
    pub store: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    /// Engine settings applied to new campaigns that omit `config`.
    pub engine: Option<CampaignConfig>,
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub addr: Option<String>,
    pub store: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub store: PathBuf,
    pub static_dir: Option<PathBuf>,
    pub engine: CampaignConfig,
}

impl ServiceConfig {
    /// Resolves each setting from flags, then the environment, then the
    /// config file, then the built-in default.
    pub fn resolve(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
        flags: Overrides,
    ) -> Result<Self, ConfigError> {
        let fc = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| ConfigError::Read { path: path.into(), source })?;
                toml::from_str::<FileConfig>(&text)
                    .map_err(|source| ConfigError::Parse { path: path.into(), source })?
            }
            None => FileConfig::default(),
        };
        let addr = flags
            .addr
            .or_else(|| env(ENV_ADDR))
            .or(fc.addr)
            .unwrap_or_else(|| "127.0.0.1:8080".into());
        let addr = addr.parse().map_err(|_| ConfigError::Addr(addr.clone()))?;
        let store = flags
            .store
            .or_else(|| env(ENV_STORE).map(PathBuf::from))
            .or(fc.store)
            .unwrap_or_else(|| PathBuf::from("campaigns"));
        let static_dir = flags
            .static_dir
            .or_else(|| env(ENV_STATIC_DIR).map(PathBuf::from))
            .or(fc.static_dir);
        let engine = fc.engine.unwrap_or_default();
        engine.validate().map_err(|e| ConfigError::Engine(e.to_string()))?;
        Ok(Self { addr, store, static_dir, engine })
    }
}

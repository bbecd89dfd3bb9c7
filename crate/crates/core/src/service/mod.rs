//! Live simulation service: a single solver thread owns the rig state,
//! HTTP and WebSocket handlers read snapshots of it.

mod live;
mod runlog;
mod server;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parent_dir, read_toml, ContextFile, SimContext};
use crate::error::ConfigError;
use crate::rod::RodError;

pub use live::{FrameStatus, LiveSim, StateFrame, FRAME_INTERVAL};
pub use runlog::{read_run, RunContents, RunLog, RunRecord};
pub use server::{router, serve, AppState};

/// Overrides `storage_root` from the config document.
pub const STORAGE_ROOT_ENV: &str = "TRUNK_STORAGE_ROOT";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Rod(#[from] RodError),
    #[error("invalid listen address {0:?}")]
    Address(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl ServiceError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        ServiceError::Io {
            context: context.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    pub storage_root: PathBuf,
    #[serde(flatten)]
    pub context: ContextFile,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8730".into(),
            storage_root: PathBuf::from("runs"),
            context: ContextFile::default(),
        }
    }
}

/// Everything the service needs at startup, with paths resolved.
#[derive(Debug, Clone)]
pub struct ResolvedService {
    pub listen: SocketAddr,
    pub storage_root: PathBuf,
    pub context: SimContext,
}

impl ServiceConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf), ConfigError> {
        let path = path.as_ref();
        Ok((read_toml(path)?, parent_dir(path).to_path_buf()))
    }

    /// Resolve relative paths against `base_dir`, apply the storage root
    /// override and create the storage root if needed.
    pub fn resolve(
        &self,
        base_dir: &Path,
        storage_override: Option<PathBuf>,
    ) -> Result<ResolvedService, ServiceError> {
        let listen = self
            .listen
            .parse()
            .map_err(|_| ServiceError::Address(self.listen.clone()))?;
        let context = self.context.resolve(base_dir)?;
        context.options.validate()?;
        let storage_root = storage_override.unwrap_or_else(|| base_dir.join(&self.storage_root));
        std::fs::create_dir_all(&storage_root)
            .map_err(|e| ServiceError::io(format!("cannot create {}", storage_root.display()), e))?;
        Ok(ResolvedService {
            listen,
            storage_root,
            context,
        })
    }
}

pub fn storage_root_from_env() -> Option<PathBuf> {
    std::env::var_os(STORAGE_ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

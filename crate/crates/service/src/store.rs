use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use catbox_core::{Campaign, CampaignError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("campaign `{0}` not found")]
    NotFound(String),
    #[error("campaign file is unreadable: {0}")]
    Corrupt(#[from] CampaignError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One JSON file per campaign under `root`, replaced atomically on every
/// write. Each campaign has an async lock that serializes its mutations.
#[derive(Debug)]
pub struct CampaignStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

/// 128-bit random identifier in lowercase hex.
pub fn new_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

fn valid_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

impl CampaignStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root, locks: Mutex::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, id: &str) -> Option<PathBuf> {
        valid_id(id).then(|| self.root.join(format!("{id}.json")))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path(id).is_some_and(|p| p.is_file())
    }

    /// The mutation lock of campaign `id`.
    pub fn lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table poisoned");
        locks.entry(id.to_string()).or_default().clone()
    }

    pub fn read_raw(&self, id: &str) -> Result<String, StoreError> {
        let path = self.path(id).ok_or_else(|| StoreError::NotFound(id.into()))?;
        match fs::read_to_string(path) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(StoreError::NotFound(id.into())),
            Err(e) => Err(e.into()),
        }
    }

    pub fn read(&self, id: &str) -> Result<Campaign, StoreError> {
        Ok(Campaign::from_json(&self.read_raw(id)?)?)
    }

    /// Writes to a temporary file in the same directory, syncs it, then
    /// renames it over the campaign file.
    pub fn write(&self, id: &str, campaign: &Campaign) -> Result<(), StoreError> {
        let path = self.path(id).ok_or_else(|| StoreError::NotFound(id.into()))?;
        write_atomic(&path, campaign.to_json().as_bytes())?;
        Ok(())
    }

    /// Persists a new campaign under a fresh id.
    pub fn create(&self, campaign: &Campaign) -> Result<String, StoreError> {
        loop {
            let id = new_id();
            if !self.exists(&id) {
                self.write(&id, campaign)?;
                return Ok(id);
            }
        }
    }

    /// Campaign ids in lexicographic order.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".json")) {
                if valid_id(id) {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}

/// Atomic file replacement: temp file in the target's directory, fsync,
/// rename, then fsync of the directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.{:016x}.tmp", rand::random::<u64>()));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

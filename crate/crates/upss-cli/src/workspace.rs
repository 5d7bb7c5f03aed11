//! The open filesystem a command works against: store, root directory,
//! vault parameters, and the advisory lock that keeps commands against
//! one vault from interleaving.

use std::fs::{File, OpenOptions, TryLockError};
use std::path::PathBuf;
use std::sync::Arc;

use upss::vault;
use upss::{BlockPointer, BlockStore, DirectoryObject};

use crate::config::Config;
use crate::Failure;

pub struct Workspace {
    pub store: Arc<dyn BlockStore>,
    pub root: DirectoryObject,
    loaded_from: BlockPointer,
    vault_path: PathBuf,
    passphrase: String,
    iterations: u32,
    // Held for the process lifetime; the OS drops it on exit.
    _lock: File,
}

fn acquire_lock(cfg: &Config) -> Result<File, Failure> {
    let path = cfg.vault.with_extension("lock");
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&path)
        .map_err(|e| Failure::Usage(format!("cannot open lock {}: {e}", path.display())))?;
    match file.try_lock() {
        Ok(()) => Ok(file),
        Err(TryLockError::WouldBlock) => Err(Failure::Usage(format!(
            "another upss process holds {}",
            path.display()
        ))),
        Err(TryLockError::Error(e)) => Err(Failure::from(e)),
    }
}

/// Create a fresh tree and vault. Refuses to overwrite an existing
/// vault file.
pub fn init(cfg: &Config) -> Result<BlockPointer, Failure> {
    let lock = acquire_lock(cfg)?;
    if cfg.vault.exists() {
        return Err(Failure::Usage(format!(
            "vault {} already exists",
            cfg.vault.display()
        )));
    }
    let store = cfg.open_store()?;
    let passphrase = cfg.passphrase()?;
    let root = DirectoryObject::create(store);
    let ptr = root.persist()?;
    vault::save_root_with(&cfg.vault, &passphrase, &ptr, cfg.vault_iters)?;
    drop(lock);
    Ok(ptr)
}

/// Open the existing tree named by the vault.
pub fn open(cfg: &Config) -> Result<Workspace, Failure> {
    let lock = acquire_lock(cfg)?;
    if !cfg.vault.exists() {
        return Err(Failure::Usage(format!(
            "vault {} does not exist; run `upss init` first",
            cfg.vault.display()
        )));
    }
    let store = cfg.open_store()?;
    let passphrase = cfg.passphrase()?;
    let ptr = vault::load_root(&cfg.vault, &passphrase)?;
    let root = DirectoryObject::load(store.clone(), &ptr)?;
    Ok(Workspace {
        store,
        root,
        loaded_from: ptr,
        vault_path: cfg.vault.clone(),
        passphrase,
        iterations: cfg.vault_iters,
        _lock: lock,
    })
}

impl Workspace {
    /// Persist the tree and, if the root moved, reseal the vault. The
    /// store write completes before the vault write, so a crash between
    /// the two leaves the old root intact and loadable.
    pub fn commit(&self) -> Result<BlockPointer, Failure> {
        let ptr = self.root.persist()?;
        if ptr != self.loaded_from {
            vault::save_root_with(&self.vault_path, &self.passphrase, &ptr, self.iterations)?;
        }
        Ok(ptr)
    }
}

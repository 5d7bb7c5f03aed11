//! Block stores: uniform contract plus the concrete backends.
//!
//! A store holds opaque fixed-size ciphertext blocks addressed by the hash
//! of their bytes. Stores never see plaintext or keys, so they are safe to
//! place on untrusted machines; every `get` re-checks the returned bytes
//! against the requested name, which makes a lying backend detectable by
//! construction.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::crypto::{self, BlockName, DEFAULT_BLOCK_SIZE};
use crate::error::{Error, Result};

mod cache;
mod file;
mod journal;
mod mirror;
pub mod testing;
mod topology;

pub use cache::{CacheConfig, CachingStore};
pub use file::FileStore;
pub use journal::Journal;
pub use mirror::MirrorStore;
pub use topology::parse_topology;

pub trait BlockStore: Send + Sync {
    /// Store one block of exactly `block_size` bytes. Idempotent: putting
    /// a block that already exists returns the same name and changes
    /// nothing.
    fn put(&self, block: &[u8]) -> Result<BlockName>;

    /// Fetch a block by name. Implementations verify that the returned
    /// bytes hash to `name` before handing them out.
    fn get(&self, name: &BlockName) -> Result<Vec<u8>>;

    fn block_size(&self) -> usize;

    fn is_persistent(&self) -> bool;

    /// Number of blocks held, where the backend can count them cheaply.
    fn block_count(&self) -> Option<u64> {
        None
    }
}

pub(crate) fn check_block_size(block: &[u8], expected: usize) -> Result<()> {
    if block.len() != expected {
        return Err(Error::BlockSize {
            expected,
            actual: block.len(),
        });
    }
    Ok(())
}

pub(crate) fn verify_block(name: &BlockName, bytes: &[u8]) -> Result<()> {
    let actual = crypto::hash_block(bytes);
    if actual != *name {
        return Err(Error::Integrity {
            expected: *name,
            actual,
        });
    }
    Ok(())
}

/// Volatile store backed by a hash map.
pub struct MemoryStore {
    block_size: usize,
    blocks: RwLock<HashMap<BlockName, Vec<u8>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::with_block_size(DEFAULT_BLOCK_SIZE)
    }

    pub fn with_block_size(block_size: usize) -> Self {
        MemoryStore {
            block_size,
            blocks: RwLock::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, name: &BlockName) -> bool {
        self.blocks.read().unwrap().contains_key(name)
    }

    /// Drop every block. Models an emptied or wiped near store.
    pub fn clear(&self) {
        self.blocks.write().unwrap().clear();
    }

    pub fn names(&self) -> Vec<BlockName> {
        self.blocks.read().unwrap().keys().copied().collect()
    }
}

impl Default for MemoryStore {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockStore for MemoryStore {
    fn put(&self, block: &[u8]) -> Result<BlockName> {
        check_block_size(block, self.block_size)?;
        let name = crypto::hash_block(block);
        self.blocks
            .write()
            .unwrap()
            .entry(name)
            .or_insert_with(|| block.to_vec());
        Ok(name)
    }

    fn get(&self, name: &BlockName) -> Result<Vec<u8>> {
        let bytes = self
            .blocks
            .read()
            .unwrap()
            .get(name)
            .cloned()
            .ok_or(Error::NotFound(*name))?;
        verify_block(name, &bytes)?;
        Ok(bytes)
    }

    fn block_size(&self) -> usize {
        self.block_size
    }

    fn is_persistent(&self) -> bool {
        false
    }

    fn block_count(&self) -> Option<u64> {
        Some(self.len() as u64)
    }
}

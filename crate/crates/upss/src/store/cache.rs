//! Write-back caching store.
//!
//! Puts land in the near store and a durable journal, then return; a
//! background agent drains journaled blocks to the far store, so put
//! latency tracks the near store rather than the (possibly remote and
//! slow) far store. Gets try near first, fall back to far and repopulate
//! near, and as a last resort serve straight from the undrained journal,
//! so a put is always readable no matter when the drain runs.

use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::crypto::{self, BlockName};
use crate::error::{Error, Result};
use crate::store::{check_block_size, verify_block, BlockStore, Journal};

#[derive(Clone, Debug)]
pub struct CacheConfig {
    /// Records moved to the far store per drain step.
    pub drain_batch: usize,
    /// Run the background drain agent. Turn off for deterministic tests
    /// and crash simulations; `drain` and `flush` still work.
    pub auto_drain: bool,
    /// Fsync the journal on every append.
    pub journal_sync: bool,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            drain_batch: 64,
            auto_drain: true,
            journal_sync: true,
        }
    }
}

struct DrainCore {
    journal: Journal,
    far: Arc<dyn BlockStore>,
    /// Serializes peek-put-commit cycles between the background agent and
    /// explicit `drain`/`flush` calls.
    drain_step: Mutex<()>,
    state: Mutex<DrainState>,
    wake: Condvar,
    batch: usize,
}

#[derive(Default)]
struct DrainState {
    shutdown: bool,
}

impl DrainCore {
    /// Move up to one batch from the journal to the far store. Returns
    /// the number of records drained. On far-store failure nothing is
    /// committed, so the records stay journaled and a later drain
    /// retries them.
    fn drain_batch(&self, max: usize) -> Result<usize> {
        let _step = self.drain_step.lock().unwrap();
        let records = self.journal.peek(max)?;
        if records.is_empty() {
            return Ok(0);
        }
        for record in &records {
            self.far.put(&record.payload)?;
        }
        self.journal.commit(&records)?;
        Ok(records.len())
    }

    fn run(&self) {
        loop {
            {
                let state = self.state.lock().unwrap();
                if state.shutdown {
                    return;
                }
                if self.journal.is_empty() {
                    // Parked until a put kicks us or shutdown.
                    let _unused = self
                        .wake
                        .wait_timeout(state, Duration::from_millis(200))
                        .unwrap();
                    continue;
                }
            }
            if self.drain_batch(self.batch).is_err() {
                // Far store unavailable; back off and retry.
                std::thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

pub struct CachingStore {
    near: Arc<dyn BlockStore>,
    core: Arc<DrainCore>,
    block_size: usize,
    agent: Option<JoinHandle<()>>,
}

impl CachingStore {
    pub fn new(
        near: Arc<dyn BlockStore>,
        far: Arc<dyn BlockStore>,
        journal_path: impl AsRef<std::path::Path>,
        config: CacheConfig,
    ) -> Result<Self> {
        if near.block_size() != far.block_size() {
            return Err(Error::BlockSize {
                expected: near.block_size(),
                actual: far.block_size(),
            });
        }
        let block_size = near.block_size();
        let journal = Journal::open(journal_path, config.journal_sync)?;
        let core = Arc::new(DrainCore {
            journal,
            far,
            drain_step: Mutex::new(()),
            state: Mutex::new(DrainState::default()),
            wake: Condvar::new(),
            batch: config.drain_batch.max(1),
        });

        let agent = if config.auto_drain {
            let core = Arc::clone(&core);
            Some(std::thread::spawn(move || core.run()))
        } else {
            None
        };

        Ok(CachingStore {
            near,
            core,
            block_size,
            agent,
        })
    }

    pub fn near_store(&self) -> &Arc<dyn BlockStore> {
        &self.near
    }

    pub fn far_store(&self) -> &Arc<dyn BlockStore> {
        &self.core.far
    }

    pub fn pending(&self) -> u64 {
        self.core.journal.pending()
    }

    /// Drain up to `max` journaled blocks now.
    pub fn drain(&self, max: usize) -> Result<usize> {
        self.core.drain_batch(max)
    }

    /// Drain until the journal is empty.
    pub fn flush(&self) -> Result<()> {
        while self.core.drain_batch(self.core.batch)? > 0 {}
        Ok(())
    }

    fn journal_lookup(&self, name: &BlockName) -> Result<Vec<u8>> {
        let records = self.core.journal.peek(usize::MAX)?;
        for record in records {
            if record.name == *name {
                verify_block(name, &record.payload)?;
                return Ok(record.payload);
            }
        }
        Err(Error::NotFound(*name))
    }
}

impl BlockStore for CachingStore {
    fn put(&self, block: &[u8]) -> Result<BlockName> {
        check_block_size(block, self.block_size)?;
        let name = crypto::hash_block(block);
        // Journal first: if the append fails the put fails whole, leaving
        // the near store untouched.
        self.core.journal.append(&name, block)?;
        self.near.put(block)?;
        self.core.wake.notify_one();
        Ok(name)
    }

    fn get(&self, name: &BlockName) -> Result<Vec<u8>> {
        match self.near.get(name) {
            Ok(bytes) => return Ok(bytes),
            Err(e) if e.is_not_found() => {}
            Err(e) => return Err(e),
        }
        match self.core.far.get(name) {
            Ok(bytes) => {
                verify_block(name, &bytes)?;
                // Repopulate the near store for the next reader.
                self.near.put(&bytes)?;
                Ok(bytes)
            }
            Err(e) if e.is_not_found() => self.journal_lookup(name),
            Err(e) => Err(e),
        }
    }

    fn block_size(&self) -> usize {
        self.block_size
    }

    fn is_persistent(&self) -> bool {
        // Durability is defined by where blocks eventually live.
        self.core.far.is_persistent()
    }
}

impl Drop for CachingStore {
    fn drop(&mut self) {
        if let Some(agent) = self.agent.take() {
            self.core.state.lock().unwrap().shutdown = true;
            self.core.wake.notify_all();
            let _unused = agent.join();
        }
    }
}

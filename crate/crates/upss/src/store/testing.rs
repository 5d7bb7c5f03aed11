//! Store wrappers for fault injection and measurement in tests and
//! benchmarks.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crate::crypto::BlockName;
use crate::error::{Error, Result};
use crate::store::BlockStore;

/// Adds a fixed sleep to every operation, modelling a slow backend.
pub struct LatencyStore {
    inner: Arc<dyn BlockStore>,
    delay: Duration,
}

impl LatencyStore {
    pub fn new(inner: Arc<dyn BlockStore>, delay: Duration) -> Self {
        LatencyStore { inner, delay }
    }
}

impl BlockStore for LatencyStore {
    fn put(&self, block: &[u8]) -> Result<BlockName> {
        std::thread::sleep(self.delay);
        self.inner.put(block)
    }

    fn get(&self, name: &BlockName) -> Result<Vec<u8>> {
        std::thread::sleep(self.delay);
        self.inner.get(name)
    }

    fn block_size(&self) -> usize {
        self.inner.block_size()
    }

    fn is_persistent(&self) -> bool {
        self.inner.is_persistent()
    }

    fn block_count(&self) -> Option<u64> {
        self.inner.block_count()
    }
}

/// Counts operations passing through to the inner store.
pub struct CountingStore {
    inner: Arc<dyn BlockStore>,
    puts: AtomicU64,
    gets: AtomicU64,
}

impl CountingStore {
    pub fn new(inner: Arc<dyn BlockStore>) -> Self {
        CountingStore {
            inner,
            puts: AtomicU64::new(0),
            gets: AtomicU64::new(0),
        }
    }

    pub fn puts(&self) -> u64 {
        self.puts.load(Ordering::Relaxed)
    }

    pub fn gets(&self) -> u64 {
        self.gets.load(Ordering::Relaxed)
    }
}

impl BlockStore for CountingStore {
    fn put(&self, block: &[u8]) -> Result<BlockName> {
        self.puts.fetch_add(1, Ordering::Relaxed);
        self.inner.put(block)
    }

    fn get(&self, name: &BlockName) -> Result<Vec<u8>> {
        self.gets.fetch_add(1, Ordering::Relaxed);
        self.inner.get(name)
    }

    fn block_size(&self) -> usize {
        self.inner.block_size()
    }

    fn is_persistent(&self) -> bool {
        self.inner.is_persistent()
    }

    fn block_count(&self) -> Option<u64> {
        self.inner.block_count()
    }
}

/// Serves tampered bytes on `get`, modelling a malicious or broken
/// backend. The corruption happens after the inner store's own integrity
/// check, which is exactly what a compromised remote looks like to a
/// caller.
pub struct CorruptingStore {
    inner: Arc<dyn BlockStore>,
    active: AtomicBool,
}

impl CorruptingStore {
    pub fn new(inner: Arc<dyn BlockStore>) -> Self {
        CorruptingStore {
            inner,
            active: AtomicBool::new(true),
        }
    }

    pub fn set_active(&self, active: bool) {
        self.active.store(active, Ordering::Relaxed);
    }
}

impl BlockStore for CorruptingStore {
    fn put(&self, block: &[u8]) -> Result<BlockName> {
        self.inner.put(block)
    }

    fn get(&self, name: &BlockName) -> Result<Vec<u8>> {
        let mut bytes = self.inner.get(name)?;
        if self.active.load(Ordering::Relaxed) {
            if let Some(b) = bytes.first_mut() {
                *b ^= 0xff;
            }
        }
        Ok(bytes)
    }

    fn block_size(&self) -> usize {
        self.inner.block_size()
    }

    fn is_persistent(&self) -> bool {
        self.inner.is_persistent()
    }
}

/// Fails operations on demand, modelling an unreachable backend.
pub struct FlakyStore {
    inner: Arc<dyn BlockStore>,
    fail_puts: AtomicBool,
    fail_gets: AtomicBool,
}

impl FlakyStore {
    pub fn new(inner: Arc<dyn BlockStore>) -> Self {
        FlakyStore {
            inner,
            fail_puts: AtomicBool::new(false),
            fail_gets: AtomicBool::new(false),
        }
    }

    pub fn fail_puts(&self, fail: bool) {
        self.fail_puts.store(fail, Ordering::SeqCst);
    }

    pub fn fail_gets(&self, fail: bool) {
        self.fail_gets.store(fail, Ordering::SeqCst);
    }

    fn down() -> Error {
        Error::Io(std::io::Error::new(
            std::io::ErrorKind::ConnectionRefused,
            "backend down",
        ))
    }
}

impl BlockStore for FlakyStore {
    fn put(&self, block: &[u8]) -> Result<BlockName> {
        if self.fail_puts.load(Ordering::SeqCst) {
            return Err(Self::down());
        }
        self.inner.put(block)
    }

    fn get(&self, name: &BlockName) -> Result<Vec<u8>> {
        if self.fail_gets.load(Ordering::SeqCst) {
            return Err(Self::down());
        }
        self.inner.get(name)
    }

    fn block_size(&self) -> usize {
        self.inner.block_size()
    }

    fn is_persistent(&self) -> bool {
        self.inner.is_persistent()
    }

    fn block_count(&self) -> Option<u64> {
        self.inner.block_count()
    }
}

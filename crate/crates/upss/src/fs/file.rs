use std::sync::{Arc, Mutex};

use crate::crypto::{BlockPointer, Padding};
use crate::dag::{self, BlockReference, History, ObjectKind, Version};
use crate::error::{Error, Result};
use crate::fs::blob::Blob;
use crate::fs::dir::Updater;
use crate::store::BlockStore;

/// A mutable file handle.
///
/// Cheap to clone; clones share state. Mutations stay in memory until
/// [`persist`](FileObject::persist), which writes only dirtied blocks and
/// chains the new version to the previous one.
#[derive(Clone)]
pub struct FileObject {
    inner: Arc<Mutex<FileInner>>,
}

struct FileInner {
    store: Arc<dyn BlockStore>,
    blob: Blob,
    current: Option<(BlockPointer, Version)>,
    padding: Padding,
    updater: Option<Updater>,
}

impl FileInner {
    fn needs_persist(&self) -> bool {
        self.current.is_none() || self.blob.is_dirty()
    }
}

impl FileObject {
    /// A new empty file, not yet persisted anywhere.
    pub fn create(store: Arc<dyn BlockStore>) -> Self {
        Self::build(store, Blob::empty(), None, Padding::Random, None)
    }

    pub(crate) fn new_child(
        store: Arc<dyn BlockStore>,
        padding: Padding,
        updater: Updater,
    ) -> Self {
        Self::build(store, Blob::empty(), None, padding, Some(updater))
    }

    /// Open the file a version pointer describes.
    pub fn load(store: Arc<dyn BlockStore>, ptr: &BlockPointer) -> Result<Self> {
        Self::load_inner(store, ptr, Padding::Random, None)
    }

    pub(crate) fn load_child(
        store: Arc<dyn BlockStore>,
        ptr: &BlockPointer,
        padding: Padding,
        updater: Updater,
    ) -> Result<Self> {
        Self::load_inner(store, ptr, padding, Some(updater))
    }

    fn load_inner(
        store: Arc<dyn BlockStore>,
        ptr: &BlockPointer,
        padding: Padding,
        updater: Option<Updater>,
    ) -> Result<Self> {
        let version = dag::decode_version(ptr, &*store)?;
        if version.kind != ObjectKind::File {
            return Err(Error::NotAFile(ptr.name.to_string()));
        }
        let blob = Blob::from_extents(version.extents.clone());
        Ok(Self::build(
            store,
            blob,
            Some((*ptr, version)),
            padding,
            updater,
        ))
    }

    fn build(
        store: Arc<dyn BlockStore>,
        blob: Blob,
        current: Option<(BlockPointer, Version)>,
        padding: Padding,
        updater: Option<Updater>,
    ) -> Self {
        FileObject {
            inner: Arc::new(Mutex::new(FileInner {
                store,
                blob,
                current,
                padding,
                updater,
            })),
        }
    }

    pub fn size(&self) -> u64 {
        self.inner.lock().unwrap().blob.len()
    }

    pub fn is_dirty(&self) -> bool {
        self.inner.lock().unwrap().needs_persist()
    }

    pub fn read(&self, offset: u64, len: u64) -> Result<Vec<u8>> {
        let g = self.inner.lock().unwrap();
        g.blob.read(&*g.store, offset, len)
    }

    pub fn read_all(&self) -> Result<Vec<u8>> {
        let g = self.inner.lock().unwrap();
        g.blob.read(&*g.store, 0, g.blob.len())
    }

    pub fn write(&self, offset: u64, data: &[u8]) -> Result<()> {
        self.inner.lock().unwrap().blob.write(offset, data)
    }

    pub fn append(&self, data: &[u8]) -> Result<()> {
        let mut g = self.inner.lock().unwrap();
        let at = g.blob.len();
        g.blob.write(at, data)
    }

    pub fn truncate(&self, len: u64) -> Result<()> {
        self.inner.lock().unwrap().blob.truncate(len);
        Ok(())
    }

    /// Write out dirty blocks and a new version chained to the previous
    /// one; idempotent when clean. The parent directory, if any, is
    /// marked dirty.
    pub fn persist(&self) -> Result<BlockPointer> {
        let (ptr, updater) = {
            let mut g = self.inner.lock().unwrap();
            if !g.needs_persist() {
                return Ok(g.current.as_ref().expect("clean implies persisted").0);
            }
            let extents = g.blob.persist_extents(&*g.store, g.padding)?;
            let prev = g.current.as_ref().map(|(p, _)| BlockReference::Full(*p));
            let version = Version::new(ObjectKind::File, extents, prev);
            let ptr = dag::encode_version(&version, &*g.store)?;
            g.blob.rebase(version.extents.clone());
            g.current = Some((ptr, version));
            (ptr, g.updater.clone())
        };
        if let Some(updater) = updater {
            updater.notify();
        }
        Ok(ptr)
    }

    /// Pointer of the last persisted version, if any.
    pub fn pointer(&self) -> Option<BlockPointer> {
        self.inner.lock().unwrap().current.as_ref().map(|(p, _)| *p)
    }

    pub fn version(&self) -> Option<Version> {
        self.inner
            .lock()
            .unwrap()
            .current
            .as_ref()
            .map(|(_, v)| v.clone())
    }

    /// Persist if needed and return the shareable identity: the textual
    /// block name and the full pointer.
    pub fn snapshot_name(&self) -> Result<(String, BlockPointer)> {
        let ptr = self.persist()?;
        Ok((ptr.name.to_string(), ptr))
    }

    /// Walk this file's version chain, newest first.
    pub fn history(&self, max_depth: Option<usize>) -> Result<History> {
        let ptr = self.persist()?;
        let store = self.inner.lock().unwrap().store.clone();
        dag::history(&ptr, &*store, max_depth)
    }

    /// A new standalone file whose blocks overlapping `[start, end]`
    /// (inclusive) are blinded to name-only references. Its `prev` names
    /// the original version without granting the ability to read it.
    pub fn redact(&self, start: u64, end: u64) -> Result<FileObject> {
        let _ = self.persist()?;
        let g = self.inner.lock().unwrap();
        let (cur_ptr, version) = g.current.clone().expect("just persisted");
        if start > end || end >= version.size {
            return Err(Error::OutOfRange {
                offset: start,
                len: end.saturating_sub(start) + 1,
                size: version.size,
            });
        }
        let mut extents = version.extents;
        let mut pos = 0u64;
        for extent in &mut extents {
            let e_start = pos;
            let e_end = pos + extent.length;
            pos = e_end;
            if e_start <= end && e_end > start {
                extent.reference = extent.reference.blinded();
            }
        }
        let redacted = Version::new(
            ObjectKind::File,
            extents,
            Some(BlockReference::NameOnly(cur_ptr.name)),
        );
        let ptr = dag::encode_version(&redacted, &*g.store)?;
        let blob = Blob::from_extents(redacted.extents.clone());
        Ok(Self::build(
            g.store.clone(),
            blob,
            Some((ptr, redacted)),
            g.padding,
            None,
        ))
    }

    /// Differences between this file and `other`, as ordered hunks.
    pub fn diff(&self, other: &FileObject) -> Result<Vec<super::diff::Hunk>> {
        super::diff::diff_files(self, other)
    }

    pub(crate) fn store(&self) -> Arc<dyn BlockStore> {
        self.inner.lock().unwrap().store.clone()
    }
}

impl std::fmt::Debug for FileObject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let g = self.inner.lock().unwrap();
        f.debug_struct("FileObject")
            .field("size", &g.blob.len())
            .field("dirty", &g.needs_persist())
            .field("pointer", &g.current.as_ref().map(|(p, _)| p.name))
            .finish()
    }
}

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, Weak};

use crate::crypto::{self, BlockPointer, Padding};
use crate::dag::{self, BlockReference, Extent, History, ObjectKind, Version};
use crate::error::{Error, Result};
use crate::fs::dirfmt::{self, RawEntry};
use crate::fs::file::FileObject;
use crate::fs::validate_name;
use crate::store::BlockStore;

/// Child-to-parent back reference. Persisting a child marks the parent
/// dirty so the change propagates on the next parent persist.
#[derive(Clone)]
pub(crate) struct Updater {
    parent: Weak<Mutex<DirInner>>,
    name: String,
}

impl Updater {
    pub(crate) fn notify(&self) {
        if let Some(parent) = self.parent.upgrade() {
            let mut g = parent.lock().unwrap();
            if g.entries.contains_key(&self.name) {
                g.dirty = true;
            }
        }
    }
}

enum Entry {
    /// Known from the persisted entry table but not opened yet.
    Lazy { kind: ObjectKind, pointer: BlockPointer },
    File(FileObject),
    Dir(DirectoryObject),
}

impl Entry {
    fn kind(&self) -> ObjectKind {
        match self {
            Entry::Lazy { kind, .. } => *kind,
            Entry::File(_) => ObjectKind::File,
            Entry::Dir(_) => ObjectKind::Directory,
        }
    }
}

pub(crate) struct DirInner {
    store: Arc<dyn BlockStore>,
    entries: BTreeMap<String, Entry>,
    current: Option<(BlockPointer, Version)>,
    dirty: bool,
    padding: Padding,
    updater: Option<Updater>,
}

/// Either kind of filesystem object, as returned by path lookup.
#[derive(Clone)]
pub enum Node {
    File(FileObject),
    Dir(DirectoryObject),
}

/// A mutable directory handle: a name-to-object map backed by a
/// persisted version. Cheap to clone; clones share state.
///
/// Entries hold live child handles, so persisting a directory first
/// recursively persists its dirty children, then writes the entry table
/// with their fresh pointers.
#[derive(Clone)]
pub struct DirectoryObject {
    inner: Arc<Mutex<DirInner>>,
}

impl DirectoryObject {
    /// A new empty directory. Files created beneath it use random
    /// padding.
    pub fn create(store: Arc<dyn BlockStore>) -> Self {
        Self::with_padding(store, Padding::Random)
    }

    /// A new empty directory whose descendant files use the given
    /// padding. Deterministic padding makes whole trees convergent.
    pub fn with_padding(store: Arc<dyn BlockStore>, padding: Padding) -> Self {
        Self::build(store, BTreeMap::new(), None, padding, None)
    }

    pub fn load(store: Arc<dyn BlockStore>, ptr: &BlockPointer) -> Result<Self> {
        Self::load_inner(store, ptr, Padding::Random, None)
    }

    pub fn load_with_padding(
        store: Arc<dyn BlockStore>,
        ptr: &BlockPointer,
        padding: Padding,
    ) -> Result<Self> {
        Self::load_inner(store, ptr, padding, None)
    }

    fn load_inner(
        store: Arc<dyn BlockStore>,
        ptr: &BlockPointer,
        padding: Padding,
        updater: Option<Updater>,
    ) -> Result<Self> {
        let version = dag::decode_version(ptr, &*store)?;
        if version.kind != ObjectKind::Directory {
            return Err(Error::NotADirectory(ptr.name.to_string()));
        }
        let content = dag::read_range(&version, 0, version.size, &*store)?;
        let raw = dirfmt::parse_entries(&content)?;
        let entries = raw
            .into_iter()
            .map(|e| {
                (
                    e.name,
                    Entry::Lazy {
                        kind: e.kind,
                        pointer: e.pointer,
                    },
                )
            })
            .collect();
        Ok(Self::build(
            store,
            entries,
            Some((*ptr, version)),
            padding,
            updater,
        ))
    }

    fn build(
        store: Arc<dyn BlockStore>,
        entries: BTreeMap<String, Entry>,
        current: Option<(BlockPointer, Version)>,
        padding: Padding,
        updater: Option<Updater>,
    ) -> Self {
        DirectoryObject {
            inner: Arc::new(Mutex::new(DirInner {
                store,
                entries,
                current,
                dirty: false,
                padding,
                updater,
            })),
        }
    }

    fn updater_for(&self, name: &str) -> Updater {
        Updater {
            parent: Arc::downgrade(&self.inner),
            name: name.to_string(),
        }
    }

    /// Create an empty file entry. Fails if the name is taken.
    pub fn create_file(&self, name: &str) -> Result<FileObject> {
        validate_name(name)?;
        let updater = self.updater_for(name);
        let mut g = self.inner.lock().unwrap();
        if g.entries.contains_key(name) {
            return Err(Error::Exists(name.to_string()));
        }
        let file = FileObject::new_child(g.store.clone(), g.padding, updater);
        g.entries.insert(name.to_string(), Entry::File(file.clone()));
        g.dirty = true;
        Ok(file)
    }

    /// Create an empty subdirectory. Fails if the name is taken.
    pub fn mkdir(&self, name: &str) -> Result<DirectoryObject> {
        validate_name(name)?;
        let updater = self.updater_for(name);
        let mut g = self.inner.lock().unwrap();
        if g.entries.contains_key(name) {
            return Err(Error::Exists(name.to_string()));
        }
        let dir = DirectoryObject::build(
            g.store.clone(),
            BTreeMap::new(),
            None,
            g.padding,
            Some(updater),
        );
        g.entries.insert(name.to_string(), Entry::Dir(dir.clone()));
        g.dirty = true;
        Ok(dir)
    }

    /// Open the subdirectory `name`, or create it if absent.
    pub fn ensure_dir(&self, name: &str) -> Result<DirectoryObject> {
        match self.open_dir(name) {
            Err(Error::NoEntry(_)) => self.mkdir(name),
            other => other,
        }
    }

    pub fn open_file(&self, name: &str) -> Result<FileObject> {
        let updater = self.updater_for(name);
        let mut g = self.inner.lock().unwrap();
        match g.entries.get(name) {
            None => Err(Error::NoEntry(name.to_string())),
            Some(Entry::File(f)) => Ok(f.clone()),
            Some(Entry::Dir(_)) => Err(Error::NotAFile(name.to_string())),
            Some(Entry::Lazy {
                kind: ObjectKind::Directory,
                ..
            }) => Err(Error::NotAFile(name.to_string())),
            Some(Entry::Lazy {
                kind: ObjectKind::File,
                pointer,
            }) => {
                let pointer = *pointer;
                let file =
                    FileObject::load_child(g.store.clone(), &pointer, g.padding, updater)?;
                g.entries.insert(name.to_string(), Entry::File(file.clone()));
                Ok(file)
            }
        }
    }

    pub fn open_dir(&self, name: &str) -> Result<DirectoryObject> {
        let updater = self.updater_for(name);
        let mut g = self.inner.lock().unwrap();
        match g.entries.get(name) {
            None => Err(Error::NoEntry(name.to_string())),
            Some(Entry::Dir(d)) => Ok(d.clone()),
            Some(Entry::File(_)) => Err(Error::NotADirectory(name.to_string())),
            Some(Entry::Lazy {
                kind: ObjectKind::File,
                ..
            }) => Err(Error::NotADirectory(name.to_string())),
            Some(Entry::Lazy {
                kind: ObjectKind::Directory,
                pointer,
            }) => {
                let pointer = *pointer;
                let dir = DirectoryObject::load_inner(
                    g.store.clone(),
                    &pointer,
                    g.padding,
                    Some(updater),
                )?;
                g.entries.insert(name.to_string(), Entry::Dir(dir.clone()));
                Ok(dir)
            }
        }
    }

    /// Drop the entry `name`. The blocks it pointed at stay in the
    /// store; old snapshots still resolve them.
    pub fn remove(&self, name: &str) -> Result<()> {
        let mut g = self.inner.lock().unwrap();
        if g.entries.remove(name).is_none() {
            return Err(Error::NoEntry(name.to_string()));
        }
        g.dirty = true;
        Ok(())
    }

    pub fn list(&self) -> Vec<(String, ObjectKind)> {
        let g = self.inner.lock().unwrap();
        g.entries
            .iter()
            .map(|(name, entry)| (name.clone(), entry.kind()))
            .collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.inner.lock().unwrap().entries.contains_key(name)
    }

    pub fn is_empty(&self) -> bool {
        self.inner.lock().unwrap().entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn entry_kind(&self, name: &str) -> Result<ObjectKind> {
        let g = self.inner.lock().unwrap();
        g.entries
            .get(name)
            .map(Entry::kind)
            .ok_or_else(|| Error::NoEntry(name.to_string()))
    }

    /// Resolve a `/`-separated path relative to this directory. Empty
    /// components and `.` are ignored; there is no `..`.
    pub fn lookup(&self, path: &str) -> Result<Node> {
        let components: Vec<&str> = path
            .split('/')
            .filter(|c| !c.is_empty() && *c != ".")
            .collect();
        if components.iter().any(|c| *c == "..") {
            return Err(Error::InvalidName(path.to_string()));
        }
        let mut dir = self.clone();
        let Some((last, intermediate)) = components.split_last() else {
            return Ok(Node::Dir(dir));
        };
        for component in intermediate {
            dir = dir.open_dir(component)?;
        }
        match dir.entry_kind(last)? {
            ObjectKind::File => Ok(Node::File(dir.open_file(last)?)),
            ObjectKind::Directory => Ok(Node::Dir(dir.open_dir(last)?)),
        }
    }

    pub fn is_dirty(&self) -> bool {
        let g = self.inner.lock().unwrap();
        if g.dirty || g.current.is_none() {
            return true;
        }
        g.entries.values().any(|entry| match entry {
            Entry::Lazy { .. } => false,
            Entry::File(f) => f.is_dirty(),
            Entry::Dir(d) => d.is_dirty(),
        })
    }

    /// Persist dirty children recursively, then the entry table, then a
    /// new version chained to the previous one. Idempotent when the
    /// whole subtree is clean.
    pub fn persist(&self) -> Result<BlockPointer> {
        enum Child {
            File(FileObject),
            Dir(DirectoryObject),
        }
        let children: Vec<Child> = {
            let g = self.inner.lock().unwrap();
            g.entries
                .values()
                .filter_map(|entry| match entry {
                    Entry::Lazy { .. } => None,
                    Entry::File(f) => Some(Child::File(f.clone())),
                    Entry::Dir(d) => Some(Child::Dir(d.clone())),
                })
                .collect()
        };
        for child in &children {
            match child {
                Child::File(f) => {
                    f.persist()?;
                }
                Child::Dir(d) => {
                    d.persist()?;
                }
            }
        }

        let (ptr, updater) = {
            let mut g = self.inner.lock().unwrap();
            if !g.dirty {
                if let Some((ptr, _)) = &g.current {
                    return Ok(*ptr);
                }
            }
            let mut raw = Vec::with_capacity(g.entries.len());
            for (name, entry) in &g.entries {
                let (kind, pointer) = match entry {
                    Entry::Lazy { kind, pointer } => (*kind, *pointer),
                    Entry::File(f) => (
                        ObjectKind::File,
                        f.pointer().expect("child persisted above"),
                    ),
                    Entry::Dir(d) => (
                        ObjectKind::Directory,
                        d.pointer().expect("child persisted above"),
                    ),
                };
                raw.push(RawEntry {
                    name: name.clone(),
                    kind,
                    pointer,
                });
            }
            let content = dirfmt::encode_entries(&raw);

            let bs = g.store.block_size();
            let mut extents = Vec::with_capacity(content.len().div_ceil(bs));
            for chunk in content.chunks(bs) {
                let (block, ptr) = crypto::seal(chunk, Padding::Deterministic, bs)?;
                g.store.put(&block)?;
                extents.push(Extent {
                    reference: BlockReference::Full(ptr),
                    length: chunk.len() as u64,
                });
            }
            let prev = g.current.as_ref().map(|(p, _)| BlockReference::Full(*p));
            let version = Version::new(ObjectKind::Directory, extents, prev);
            let ptr = dag::encode_version(&version, &*g.store)?;
            g.current = Some((ptr, version));
            g.dirty = false;
            (ptr, g.updater.clone())
        };
        if let Some(updater) = updater {
            updater.notify();
        }
        Ok(ptr)
    }

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

    /// Walk this directory's version chain, newest first.
    pub fn history(&self, max_depth: Option<usize>) -> Result<History> {
        let ptr = self.persist()?;
        let store = self.inner.lock().unwrap().store.clone();
        dag::history(&ptr, &*store, max_depth)
    }

}

impl std::fmt::Debug for DirectoryObject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let g = self.inner.lock().unwrap();
        f.debug_struct("DirectoryObject")
            .field("entries", &g.entries.len())
            .field("dirty", &g.dirty)
            .field("pointer", &g.current.as_ref().map(|(p, _)| p.name))
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::MemoryStore;

    fn mem() -> Arc<MemoryStore> {
        Arc::new(MemoryStore::new())
    }

    #[test]
    fn create_lookup_list_remove() {
        let store = mem();
        let root = DirectoryObject::create(store);
        let f = root.create_file("notes.txt").unwrap();
        f.write(0, b"jot").unwrap();
        root.mkdir("docs").unwrap();

        assert_eq!(
            root.list(),
            vec![
                ("docs".to_string(), ObjectKind::Directory),
                ("notes.txt".to_string(), ObjectKind::File),
            ]
        );
        assert!(matches!(root.lookup("notes.txt"), Ok(Node::File(_))));
        assert!(matches!(root.lookup("docs"), Ok(Node::Dir(_))));
        assert!(matches!(
            root.lookup("missing"),
            Err(Error::NoEntry(_))
        ));

        assert!(matches!(
            root.create_file("notes.txt"),
            Err(Error::Exists(_))
        ));
        assert!(matches!(root.mkdir("docs"), Err(Error::Exists(_))));

        root.remove("notes.txt").unwrap();
        assert!(!root.contains("notes.txt"));
        assert!(matches!(root.remove("notes.txt"), Err(Error::NoEntry(_))));
    }

    #[test]
    fn rejects_bad_names() {
        let store = mem();
        let root = DirectoryObject::create(store);
        for bad in ["", ".", "..", "a/b", "nul\0byte"] {
            assert!(matches!(
                root.create_file(bad),
                Err(Error::InvalidName(_))
            ));
        }
    }

    #[test]
    fn persist_reload_three_levels() {
        let store = mem();
        let root = DirectoryObject::create(store.clone());
        let home = root.mkdir("home").unwrap();
        let user = home.mkdir("user").unwrap();
        let file = user.create_file("thesis.tex").unwrap();
        file.write(0, b"\\documentclass{book}").unwrap();
        let ptr = root.persist().unwrap();

        let again = DirectoryObject::load(store, &ptr).unwrap();
        let Node::File(found) = again.lookup("home/user/thesis.tex").unwrap() else {
            panic!("expected a file");
        };
        assert_eq!(found.read_all().unwrap(), b"\\documentclass{book}");
        assert!(matches!(
            again.lookup("home/user"),
            Ok(Node::Dir(_))
        ));
    }

    #[test]
    fn updater_propagates_child_changes_to_new_root() {
        let store = mem();
        let root = DirectoryObject::create(store.clone());
        let sub = root.mkdir("sub").unwrap();
        let file = sub.create_file("data").unwrap();
        file.write(0, b"old").unwrap();
        let root_v1 = root.persist().unwrap();

        file.write(0, b"new").unwrap();
        assert!(root.is_dirty());
        let root_v2 = root.persist().unwrap();
        assert_ne!(root_v1, root_v2);

        // New root sees the new bytes.
        let r2 = DirectoryObject::load(store.clone(), &root_v2).unwrap();
        let Node::File(f2) = r2.lookup("sub/data").unwrap() else {
            panic!()
        };
        assert_eq!(f2.read_all().unwrap(), b"new");

        // Old root still sees the old bytes.
        let r1 = DirectoryObject::load(store, &root_v1).unwrap();
        let Node::File(f1) = r1.lookup("sub/data").unwrap() else {
            panic!()
        };
        assert_eq!(f1.read_all().unwrap(), b"old");
    }

    #[test]
    fn clean_tree_persist_is_idempotent() {
        let store = mem();
        let root = DirectoryObject::create(store.clone());
        let sub = root.mkdir("a").unwrap();
        sub.create_file("f").unwrap().write(0, b"x").unwrap();
        let p1 = root.persist().unwrap();
        let blocks = store.len();
        let p2 = root.persist().unwrap();
        assert_eq!(p1, p2);
        assert_eq!(store.len(), blocks);
    }

    #[test]
    fn entry_order_does_not_matter() {
        let store = mem();
        let d1 = DirectoryObject::with_padding(store.clone(), Padding::Deterministic);
        d1.create_file("x").unwrap().write(0, b"same").unwrap();
        d1.create_file("y").unwrap().write(0, b"bytes").unwrap();

        let d2 = DirectoryObject::with_padding(store.clone(), Padding::Deterministic);
        d2.create_file("y").unwrap().write(0, b"bytes").unwrap();
        d2.create_file("x").unwrap().write(0, b"same").unwrap();

        assert_eq!(d1.persist().unwrap(), d2.persist().unwrap());
    }

    #[test]
    fn reingesting_identical_content_adds_nothing_but_metadata() {
        let store = mem();
        let root = DirectoryObject::with_padding(store.clone(), Padding::Deterministic);
        let payload: Vec<u8> = (0..1024 * 1024u32).map(|i| (i % 251) as u8).collect();

        let f1 = root.create_file("first.bin").unwrap();
        f1.write(0, &payload).unwrap();
        root.persist().unwrap();

        let before = store.len();
        let f2 = root.create_file("second.bin").unwrap();
        f2.write(0, &payload).unwrap();
        root.persist().unwrap();
        // All 256 data blocks and the file manifest converge; only the
        // directory's entry table and its manifest are new.
        assert!(store.len() - before <= 3, "added {}", store.len() - before);
    }

    #[test]
    fn removed_entry_stays_in_old_snapshot_only() {
        let store = mem();
        let root = DirectoryObject::create(store.clone());
        root.create_file("doomed").unwrap().write(0, b"bye").unwrap();
        let p1 = root.persist().unwrap();
        root.remove("doomed").unwrap();
        let p2 = root.persist().unwrap();

        let r2 = DirectoryObject::load(store.clone(), &p2).unwrap();
        assert!(r2.is_empty());
        let r1 = DirectoryObject::load(store, &p1).unwrap();
        assert!(r1.contains("doomed"));
    }
}

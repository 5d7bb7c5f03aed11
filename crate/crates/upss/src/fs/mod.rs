//! Mutable files and directories over immutable versions.
//!
//! A [`FileObject`] or [`DirectoryObject`] is an in-memory, copy-on-write
//! view rooted at a persisted version (or empty, for new objects). Reads
//! and writes go through an overlay; nothing in the store changes until
//! `persist`, which writes only the blocks for dirtied block-aligned
//! regions, reuses every untouched extent of the base version, and chains
//! the new version to the old one via `prev`.
//!
//! Directory entries hold live child handles; a child keeps an `Updater`
//! back-reference so persisting it marks the parent dirty. Persisting a
//! directory recursively persists dirty children first, so persisting the
//! root captures a consistent snapshot of the whole tree.

pub mod diff;

pub(crate) mod blob;
pub(crate) mod dirfmt;

mod dir;
mod file;

pub use dir::{DirectoryObject, Node};
pub use file::FileObject;

use crate::error::{Error, Result};

/// Directory entry names: non-empty, no separators, no NUL, and not the
/// dot names, so paths stay unambiguous.
pub(crate) fn validate_name(name: &str) -> Result<()> {
    if name.is_empty() {
        return Err(Error::InvalidName("empty name".into()));
    }
    if name == "." || name == ".." {
        return Err(Error::InvalidName(name.into()));
    }
    if name.contains('/') || name.contains('\0') {
        return Err(Error::InvalidName(name.into()));
    }
    Ok(())
}

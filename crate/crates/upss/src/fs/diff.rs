//! Block-granular differences between two file versions.
//!
//! Comparison walks both extent lists in lockstep. Readable extents with
//! equal names are skipped without fetching (same name, same plaintext);
//! unequal readable extents shrink to the minimal differing byte range.
//! A name-only extent on either side turns the block into a `Redacted`
//! hunk, except when both sides are blind with equal names, which proves
//! equality without any key. Size deltas at the tail become `Add` and
//! `Delete` hunks.

use crate::crypto::{self, BlockPointer};
use crate::dag::{BlockReference, Version};
use crate::error::Result;
use crate::fs::FileObject;
use crate::store::BlockStore;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Hunk {
    /// A range unreadable on at least one side.
    Redacted {
        offset: u64,
        orig_len: u64,
        new_len: u64,
    },
    /// Bytes changed in place; `orig` and `new` have equal length.
    Replace {
        offset: u64,
        orig: Vec<u8>,
        new: Vec<u8>,
    },
    /// Bytes present only in the new file.
    Add { offset: u64, bytes: Vec<u8> },
    /// Bytes present only in the original.
    Delete { offset: u64, orig: Vec<u8> },
}

fn read_extent(ptr: &BlockPointer, length: u64, store: &dyn BlockStore) -> Result<Vec<u8>> {
    let block = store.get(&ptr.name)?;
    crypto::open(&block, ptr, length as usize)
}

/// Diff two persisted versions against the same store.
pub fn diff_versions(
    original: &Version,
    other: &Version,
    store: &dyn BlockStore,
) -> Result<Vec<Hunk>> {
    let mut hunks: Vec<Hunk> = Vec::new();
    let mut a_off = 0u64;
    let mut b_off = 0u64;
    let slots = original.extents.len().max(other.extents.len());

    for i in 0..slots {
        let a = original.extents.get(i);
        let b = other.extents.get(i);
        let offset = if a.is_some() { a_off } else { b_off };
        a_off += a.map_or(0, |e| e.length);
        b_off += b.map_or(0, |e| e.length);

        let hunk = match (a, b) {
            (None, None) => continue,
            (Some(ae), None) => match &ae.reference {
                BlockReference::Full(ptr) => Hunk::Delete {
                    offset,
                    orig: read_extent(ptr, ae.length, store)?,
                },
                BlockReference::NameOnly(_) => Hunk::Redacted {
                    offset,
                    orig_len: ae.length,
                    new_len: 0,
                },
            },
            (None, Some(be)) => match &be.reference {
                BlockReference::Full(ptr) => Hunk::Add {
                    offset,
                    bytes: read_extent(ptr, be.length, store)?,
                },
                BlockReference::NameOnly(_) => Hunk::Redacted {
                    offset,
                    orig_len: 0,
                    new_len: be.length,
                },
            },
            (Some(ae), Some(be)) => match (&ae.reference, &be.reference) {
                (BlockReference::Full(ap), BlockReference::Full(bp)) => {
                    if ap.name == bp.name {
                        continue;
                    }
                    let abytes = read_extent(ap, ae.length, store)?;
                    let bbytes = read_extent(bp, be.length, store)?;
                    push_byte_hunks(&mut hunks, offset, &abytes, &bbytes);
                    continue;
                }
                (BlockReference::NameOnly(an), BlockReference::NameOnly(bn)) if an == bn => {
                    continue;
                }
                _ => Hunk::Redacted {
                    offset,
                    orig_len: ae.length,
                    new_len: be.length,
                },
            },
        };
        push_merged(&mut hunks, hunk);
    }
    Ok(hunks)
}

/// Minimal hunks for one differing readable block pair.
fn push_byte_hunks(hunks: &mut Vec<Hunk>, offset: u64, a: &[u8], b: &[u8]) {
    let common = a.len().min(b.len());
    let mut first = None;
    let mut last = 0;
    for i in 0..common {
        if a[i] != b[i] {
            if first.is_none() {
                first = Some(i);
            }
            last = i;
        }
    }
    if let Some(first) = first {
        hunks.push(Hunk::Replace {
            offset: offset + first as u64,
            orig: a[first..=last].to_vec(),
            new: b[first..=last].to_vec(),
        });
    }
    if b.len() > common {
        hunks.push(Hunk::Add {
            offset: offset + common as u64,
            bytes: b[common..].to_vec(),
        });
    }
    if a.len() > common {
        hunks.push(Hunk::Delete {
            offset: offset + common as u64,
            orig: a[common..].to_vec(),
        });
    }
}

/// Append a hunk, merging runs of adjacent redacted blocks.
fn push_merged(hunks: &mut Vec<Hunk>, hunk: Hunk) {
    if let (
        Some(Hunk::Redacted {
            offset,
            orig_len,
            new_len,
        }),
        Hunk::Redacted {
            offset: o,
            orig_len: ol,
            new_len: nl,
        },
    ) = (hunks.last_mut(), &hunk)
    {
        if orig_len == new_len && *offset + *orig_len == *o {
            *orig_len += ol;
            *new_len += nl;
            return;
        }
    }
    hunks.push(hunk);
}

/// Diff two files; both are persisted first if dirty.
pub fn diff_files(original: &FileObject, other: &FileObject) -> Result<Vec<Hunk>> {
    original.persist()?;
    other.persist()?;
    let store = original.store();
    diff_versions(
        &original.version().expect("persisted"),
        &other.version().expect("persisted"),
        &*store,
    )
}

fn payload(bytes: &[u8]) -> String {
    if !bytes.is_empty() && bytes.iter().all(|b| (0x20..=0x7e).contains(b)) {
        format!("\"{}\"", String::from_utf8_lossy(bytes))
    } else {
        format!("0x{}", hex::encode(bytes))
    }
}

/// Render hunks in a unified-diff-like layout.
pub fn render(hunks: &[Hunk]) -> String {
    let mut out = String::from("--- a/file\n+++ b/file\n");
    for hunk in hunks {
        match hunk {
            Hunk::Redacted {
                offset,
                orig_len,
                new_len,
            } => {
                out.push_str(&format!("\n@@ -{offset},{orig_len} +{offset},{new_len} @@\n"));
                out.push_str("+++ Redacted\n");
            }
            Hunk::Replace { offset, orig, new } => {
                out.push_str(&format!(
                    "\n@@ -{offset},{} +{offset},{} @@\n",
                    orig.len(),
                    new.len()
                ));
                out.push_str(&format!("- {}\n", payload(orig)));
                out.push_str(&format!("+ {}\n", payload(new)));
            }
            Hunk::Add { offset, bytes } => {
                out.push_str(&format!("\n@@ -{offset},0 +{offset},{} @@\n", bytes.len()));
                out.push_str(&format!("+ {}\n", payload(bytes)));
            }
            Hunk::Delete { offset, orig } => {
                out.push_str(&format!("\n@@ -{offset},{} +{offset},0 @@\n", orig.len()));
                out.push_str(&format!("- {}\n", payload(orig)));
            }
        }
    }
    out
}

/// Apply the non-redacted hunks to the original's bytes. Redacted
/// ranges keep whatever the original held; callers compare readable
/// ranges only.
pub fn apply(original: &[u8], hunks: &[Hunk]) -> Vec<u8> {
    let mut out = original.to_vec();
    for hunk in hunks {
        match hunk {
            Hunk::Redacted { .. } => {}
            Hunk::Replace { offset, new, .. } => {
                let at = *offset as usize;
                out[at..at + new.len()].copy_from_slice(new);
            }
            Hunk::Add { offset, bytes } => {
                let at = *offset as usize;
                if out.len() < at + bytes.len() {
                    out.resize(at + bytes.len(), 0);
                }
                out[at..at + bytes.len()].copy_from_slice(bytes);
            }
            Hunk::Delete { offset, .. } => {
                out.truncate(*offset as usize);
            }
        }
    }
    out
}

//! Immutable version manifests.
//!
//! A [`Version`] describes one snapshot of a file or directory: an
//! ordered list of extents (block references plus the number of logical
//! bytes each contributes), the total size, and an optional reference to
//! the previous version. Versions are themselves stored as encrypted
//! blocks, so a version pointer roots a Merkle DAG: any change to any
//! reachable block changes the root name.
//!
//! ## Manifest encoding
//!
//! Manifests serialize canonically so that equal versions produce equal
//! blocks and deduplicate. The head block is:
//!
//! ```text
//! "VR" [fmt 0x01] [kind] [size uvarint] [prev ref]
//!      [extent count uvarint] [extents...] [next ref]
//! ```
//!
//! where a reference is a kind byte (`0x00` none, `0x01` full pointer,
//! `0x02` name only, `0x03` continuation) followed by the encoded pointer
//! or name, and an extent is a full or name-only reference followed by a
//! length uvarint. When the extent list does not fit in one block it is
//! split across continuation blocks (`"VC"` instead of `"VR"`, carrying
//! only extents and a next reference) linked by `next`. Chunk boundaries
//! use worst-case field widths, so a version whose extents change without
//! changing their count re-encodes every unchanged continuation block to
//! the identical bytes, and only touched chunks become new blocks.
//!
//! Manifest blocks are sealed with deterministic padding: convergence of
//! metadata is what makes independently built identical trees collide on
//! the same root pointer.

use std::collections::HashSet;

use crate::crypto::{self, BlockName, BlockPointer, Padding, POINTER_LEN};
use crate::error::{Error, Result};
use crate::store::BlockStore;
use crate::util::{write_uvarint, ByteReader};

const REF_NONE: u8 = 0x00;
const REF_FULL: u8 = 0x01;
const REF_NAME_ONLY: u8 = 0x02;
const REF_CONTINUATION: u8 = 0x03;

const VARINT_MAX: usize = 10;
const REF_FULL_LEN: usize = 1 + POINTER_LEN;
/// Worst-case encoded extent: full reference plus maximal length varint.
const EXTENT_SLOT: usize = REF_FULL_LEN + VARINT_MAX;
const HEAD_OVERHEAD: usize = 2 + 1 + 1 + VARINT_MAX + REF_FULL_LEN + VARINT_MAX + REF_FULL_LEN;
const CONT_OVERHEAD: usize = 2 + 1 + VARINT_MAX + REF_FULL_LEN;

/// A reference to one block: either a full pointer (fetch and read) or
/// a bare name (prove existence and integrity, but no readability).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum BlockReference {
    Full(BlockPointer),
    NameOnly(BlockName),
}

impl BlockReference {
    pub fn name(&self) -> BlockName {
        match self {
            BlockReference::Full(ptr) => ptr.name,
            BlockReference::NameOnly(name) => *name,
        }
    }

    pub fn pointer(&self) -> Option<&BlockPointer> {
        match self {
            BlockReference::Full(ptr) => Some(ptr),
            BlockReference::NameOnly(_) => None,
        }
    }

    pub fn is_readable(&self) -> bool {
        matches!(self, BlockReference::Full(_))
    }

    /// The same reference with the key dropped.
    pub fn blinded(&self) -> BlockReference {
        BlockReference::NameOnly(self.name())
    }
}

/// One run of logical bytes backed by one block.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Extent {
    pub reference: BlockReference,
    pub length: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ObjectKind {
    File,
    Directory,
}

impl ObjectKind {
    fn tag(self) -> u8 {
        match self {
            ObjectKind::File => 0x01,
            ObjectKind::Directory => 0x02,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0x01 => Ok(ObjectKind::File),
            0x02 => Ok(ObjectKind::Directory),
            other => Err(Error::malformed(
                "version manifest",
                format!("unknown object kind 0x{other:02x}"),
            )),
        }
    }
}

/// An immutable snapshot of a file or directory.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Version {
    pub kind: ObjectKind,
    pub size: u64,
    pub extents: Vec<Extent>,
    pub prev: Option<BlockReference>,
}

impl Version {
    pub fn new(kind: ObjectKind, extents: Vec<Extent>, prev: Option<BlockReference>) -> Self {
        let size = extents.iter().map(|e| e.length).sum();
        Version {
            kind,
            size,
            extents,
            prev,
        }
    }

    /// True if every extent is readable (no redacted ranges).
    pub fn fully_readable(&self) -> bool {
        self.extents.iter().all(|e| e.reference.is_readable())
    }
}

fn encode_reference(buf: &mut Vec<u8>, reference: &BlockReference) {
    match reference {
        BlockReference::Full(ptr) => {
            buf.push(REF_FULL);
            buf.extend_from_slice(&ptr.encode());
        }
        BlockReference::NameOnly(name) => {
            buf.push(REF_NAME_ONLY);
            buf.extend_from_slice(&name.encode());
        }
    }
}

fn decode_reference(r: &mut ByteReader<'_>, kind: u8) -> Result<BlockReference> {
    match kind {
        REF_FULL => Ok(BlockReference::Full(BlockPointer::decode(
            r.take(POINTER_LEN)?,
        )?)),
        REF_NAME_ONLY => Ok(BlockReference::NameOnly(BlockName::decode(
            r.take(BlockName::ENCODED_LEN)?,
        )?)),
        other => Err(Error::malformed(
            "version manifest",
            format!("unexpected reference kind 0x{other:02x}"),
        )),
    }
}

fn encode_extents(buf: &mut Vec<u8>, extents: &[Extent]) {
    write_uvarint(buf, extents.len() as u64);
    for extent in extents {
        encode_reference(buf, &extent.reference);
        write_uvarint(buf, extent.length);
    }
}

/// Extents per head block and per continuation block for a given block
/// size, computed from worst-case field widths so boundaries are stable.
fn chunk_slots(block_size: usize) -> Result<(usize, usize)> {
    if block_size <= HEAD_OVERHEAD + EXTENT_SLOT {
        return Err(Error::malformed(
            "version manifest",
            format!("block size {block_size} cannot hold a manifest"),
        ));
    }
    Ok((
        (block_size - HEAD_OVERHEAD) / EXTENT_SLOT,
        (block_size - CONT_OVERHEAD) / EXTENT_SLOT,
    ))
}

/// Serialize and store `version`, splitting oversized extent lists across
/// continuation blocks. Returns the pointer to the head manifest block.
/// Deterministic: equal versions produce equal pointers.
pub fn encode_version(version: &Version, store: &dyn BlockStore) -> Result<BlockPointer> {
    let block_size = store.block_size();
    let (head_slots, cont_slots) = chunk_slots(block_size)?;

    let (head_extents, mut tail) = if version.extents.len() <= head_slots {
        (&version.extents[..], Vec::new())
    } else {
        let (head, rest) = version.extents.split_at(head_slots);
        let chunks: Vec<&[Extent]> = rest.chunks(cont_slots).collect();
        (head, chunks)
    };

    // Build the chain back to front so each chunk can embed the pointer
    // to its successor.
    let mut next: Option<BlockPointer> = None;
    while let Some(chunk) = tail.pop() {
        let mut buf = Vec::with_capacity(block_size);
        buf.extend_from_slice(b"VC");
        buf.push(0x01);
        encode_extents(&mut buf, chunk);
        match next {
            Some(ptr) => {
                buf.push(REF_CONTINUATION);
                buf.extend_from_slice(&ptr.encode());
            }
            None => buf.push(REF_NONE),
        }
        let (block, ptr) = crypto::seal(&buf, Padding::Deterministic, block_size)?;
        store.put(&block)?;
        next = Some(ptr);
    }

    let mut buf = Vec::with_capacity(block_size);
    buf.extend_from_slice(b"VR");
    buf.push(0x01);
    buf.push(version.kind.tag());
    write_uvarint(&mut buf, version.size);
    match &version.prev {
        Some(reference) => encode_reference(&mut buf, reference),
        None => buf.push(REF_NONE),
    }
    encode_extents(&mut buf, head_extents);
    match next {
        Some(ptr) => {
            buf.push(REF_CONTINUATION);
            buf.extend_from_slice(&ptr.encode());
        }
        None => buf.push(REF_NONE),
    }
    debug_assert!(buf.len() <= block_size);
    let (block, ptr) = crypto::seal(&buf, Padding::Deterministic, block_size)?;
    store.put(&block)?;
    Ok(ptr)
}

struct Chunk {
    head: Option<(ObjectKind, u64, Option<BlockReference>)>,
    extents: Vec<Extent>,
    next: Option<BlockPointer>,
}

fn parse_chunk(bytes: &[u8], expect_head: bool) -> Result<Chunk> {
    let mut r = ByteReader::new(bytes, "version manifest");
    let magic = r.take(2)?;
    let head = match magic {
        b"VR" if expect_head => true,
        b"VC" if !expect_head => false,
        b"VR" | b"VC" => {
            return Err(Error::malformed(
                "version manifest",
                "continuation and head blocks swapped",
            ))
        }
        _ => return Err(Error::malformed("version manifest", "bad magic")),
    };
    let fmt = r.u8()?;
    if fmt != 0x01 {
        return Err(Error::malformed(
            "version manifest",
            format!("unknown format version 0x{fmt:02x}"),
        ));
    }

    let head_fields = if head {
        let kind = ObjectKind::from_tag(r.u8()?)?;
        let size = r.uvarint()?;
        let prev = match r.u8()? {
            REF_NONE => None,
            kind => Some(decode_reference(&mut r, kind)?),
        };
        Some((kind, size, prev))
    } else {
        None
    };

    let count = r.uvarint()?;
    let mut extents = Vec::with_capacity(count.min(1 << 16) as usize);
    for _ in 0..count {
        let kind = r.u8()?;
        let reference = decode_reference(&mut r, kind)?;
        let length = r.uvarint()?;
        if length == 0 {
            return Err(Error::malformed("version manifest", "zero-length extent"));
        }
        extents.push(Extent { reference, length });
    }

    let next = match r.u8()? {
        REF_NONE => None,
        REF_CONTINUATION => Some(BlockPointer::decode(r.take(POINTER_LEN)?)?),
        other => {
            return Err(Error::malformed(
                "version manifest",
                format!("bad continuation kind 0x{other:02x}"),
            ))
        }
    };
    // Anything after `next` is padding.

    Ok(Chunk {
        head: head_fields,
        extents,
        next,
    })
}

fn fetch_chunk(ptr: &BlockPointer, store: &dyn BlockStore, expect_head: bool) -> Result<Chunk> {
    let block = store.get(&ptr.name)?;
    let plain = crypto::open(&block, ptr, block.len())?;
    parse_chunk(&plain, expect_head)
}

/// Load a version from its head manifest block, following continuation
/// links.
pub fn decode_version(ptr: &BlockPointer, store: &dyn BlockStore) -> Result<Version> {
    let head = fetch_chunk(ptr, store, true)?;
    let (kind, size, prev) = head.head.expect("head chunk carries header");

    let mut extents = head.extents;
    let mut next = head.next;
    let mut hops = 0usize;
    while let Some(cont_ptr) = next {
        hops += 1;
        if hops > 1 << 20 {
            return Err(Error::malformed("version manifest", "continuation loop"));
        }
        let chunk = fetch_chunk(&cont_ptr, store, false)?;
        extents.extend(chunk.extents);
        next = chunk.next;
    }

    let total: u64 = extents.iter().map(|e| e.length).sum();
    if total != size {
        return Err(Error::malformed(
            "version manifest",
            format!("extent lengths sum to {total}, size says {size}"),
        ));
    }
    let capacity = store.block_size() as u64;
    if extents.iter().any(|e| e.length > capacity) {
        return Err(Error::malformed(
            "version manifest",
            "extent longer than a block",
        ));
    }

    Ok(Version {
        kind,
        size,
        extents,
        prev,
    })
}

/// Read `len` logical bytes at `offset` from a version's extents.
/// Touching a name-only extent fails with [`Error::Redacted`].
pub fn read_range(
    version: &Version,
    offset: u64,
    len: u64,
    store: &dyn BlockStore,
) -> Result<Vec<u8>> {
    if offset + len > version.size {
        return Err(Error::OutOfRange {
            offset,
            len,
            size: version.size,
        });
    }
    if len == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(len as usize);
    let mut pos = 0u64;
    let end = offset + len;
    for extent in &version.extents {
        let e_start = pos;
        let e_end = pos + extent.length;
        pos = e_end;
        if e_end <= offset {
            continue;
        }
        if e_start >= end {
            break;
        }
        let from = offset.max(e_start) - e_start;
        let to = end.min(e_end) - e_start;
        match &extent.reference {
            BlockReference::Full(ptr) => {
                let block = store.get(&ptr.name)?;
                let content = crypto::open(&block, ptr, extent.length as usize)?;
                out.extend_from_slice(&content[from as usize..to as usize]);
            }
            BlockReference::NameOnly(_) => return Err(Error::Redacted),
        }
    }
    Ok(out)
}

/// One step in a version history.
#[derive(Clone, Debug)]
pub enum HistoryEntry {
    /// A readable version.
    Version {
        pointer: BlockPointer,
        version: Version,
    },
    /// A redaction boundary: the predecessor exists but is unreadable.
    Blind(BlockName),
}

#[derive(Clone, Debug, Default)]
pub struct History {
    pub entries: Vec<HistoryEntry>,
    /// Set when the walk stopped at `max_depth`.
    pub truncated: bool,
    /// Name of a missing block that broke the chain, if any.
    pub broken: Option<BlockName>,
}

/// Walk the `prev` chain from `ptr`, newest first. A missing block stops
/// the walk and is reported in `broken` alongside everything already
/// reached.
pub fn history(
    ptr: &BlockPointer,
    store: &dyn BlockStore,
    max_depth: Option<usize>,
) -> Result<History> {
    let mut out = History::default();
    let mut current = *ptr;
    loop {
        if let Some(max) = max_depth {
            if out.entries.len() >= max {
                out.truncated = true;
                return Ok(out);
            }
        }
        let version = match decode_version(&current, store) {
            Ok(v) => v,
            Err(e) if e.is_not_found() => {
                out.broken = Some(current.name);
                return Ok(out);
            }
            Err(e) => return Err(e),
        };
        let prev = version.prev;
        out.entries.push(HistoryEntry::Version {
            pointer: current,
            version,
        });
        match prev {
            None => return Ok(out),
            Some(BlockReference::Full(p)) => current = p,
            Some(BlockReference::NameOnly(name)) => {
                out.entries.push(HistoryEntry::Blind(name));
                return Ok(out);
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ProblemKind {
    Missing,
    Corrupt,
    Malformed,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub name: BlockName,
    pub kind: ProblemKind,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    /// Distinct blocks checked.
    pub checked: u64,
    pub problems: Vec<Problem>,
}

impl VerifyReport {
    pub fn all_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Recursively verify every block reachable from `reference`: manifest
/// chains, data extents, directory children, and `prev` history.
/// Name-only references are checked for existence and integrity;
/// readable manifests are decoded and descended into. Problems are
/// collected, not thrown; only environmental store failures abort.
/// `max_versions` bounds how many manifests are decoded.
pub fn verify(
    reference: &BlockReference,
    store: &dyn BlockStore,
    max_versions: Option<usize>,
) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let mut seen: HashSet<BlockName> = HashSet::new();
    let mut manifests: Vec<BlockReference> = vec![*reference];
    let mut decoded = 0usize;

    while let Some(item) = manifests.pop() {
        match item {
            BlockReference::NameOnly(name) => {
                check_block(&name, store, &mut seen, &mut report)?;
            }
            BlockReference::Full(ptr) => {
                if let Some(max) = max_versions {
                    if decoded >= max {
                        continue;
                    }
                }
                decoded += 1;
                match verify_version(&ptr, store, &mut seen, &mut report)? {
                    Some(children) => manifests.extend(children),
                    None => {}
                }
            }
        }
    }
    Ok(report)
}

/// Check existence and integrity of one block. Returns its bytes when
/// they are fine.
fn check_block(
    name: &BlockName,
    store: &dyn BlockStore,
    seen: &mut HashSet<BlockName>,
    report: &mut VerifyReport,
) -> Result<Option<Vec<u8>>> {
    if !seen.insert(*name) {
        return Ok(None);
    }
    report.checked += 1;
    match store.get(name) {
        Ok(bytes) => Ok(Some(bytes)),
        Err(Error::NotFound(_)) => {
            report.problems.push(Problem {
                name: *name,
                kind: ProblemKind::Missing,
            });
            Ok(None)
        }
        Err(Error::Integrity { .. }) => {
            report.problems.push(Problem {
                name: *name,
                kind: ProblemKind::Corrupt,
            });
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Verify one version's manifest chain and extents. Returns further
/// references to verify (children of a directory, plus `prev`).
fn verify_version(
    ptr: &BlockPointer,
    store: &dyn BlockStore,
    seen: &mut HashSet<BlockName>,
    report: &mut VerifyReport,
) -> Result<Option<Vec<BlockReference>>> {
    let mut followups = Vec::new();
    let mut extents = Vec::new();
    let mut header: Option<(ObjectKind, u64, Option<BlockReference>)> = None;

    // Walk the manifest chain.
    let mut link = Some(*ptr);
    let mut expect_head = true;
    while let Some(chunk_ptr) = link {
        let Some(block) = check_block(&chunk_ptr.name, store, seen, report)? else {
            return Ok(Some(followups));
        };
        let plain = match crypto::open(&block, &chunk_ptr, block.len()) {
            Ok(p) => p,
            Err(_) => {
                report.problems.push(Problem {
                    name: chunk_ptr.name,
                    kind: ProblemKind::Corrupt,
                });
                return Ok(Some(followups));
            }
        };
        let chunk = match parse_chunk(&plain, expect_head) {
            Ok(c) => c,
            Err(_) => {
                report.problems.push(Problem {
                    name: chunk_ptr.name,
                    kind: ProblemKind::Malformed,
                });
                return Ok(Some(followups));
            }
        };
        if expect_head {
            header = chunk.head;
        }
        extents.extend(chunk.extents);
        link = chunk.next;
        expect_head = false;
    }

    let (kind, size, prev) = header.expect("head chunk parsed");
    if extents.iter().map(|e| e.length).sum::<u64>() != size {
        report.problems.push(Problem {
            name: ptr.name,
            kind: ProblemKind::Malformed,
        });
    }
    if let Some(prev) = prev {
        followups.push(prev);
    }

    // Check data blocks; reassemble directory content to reach children.
    let mut dir_content = if kind == ObjectKind::Directory {
        Some(Vec::with_capacity(size as usize))
    } else {
        None
    };
    for extent in &extents {
        match &extent.reference {
            BlockReference::Full(data_ptr) => {
                let Some(block) = check_block(&data_ptr.name, store, seen, report)? else {
                    dir_content = None;
                    continue;
                };
                if let Some(content) = dir_content.as_mut() {
                    match crypto::open(&block, data_ptr, extent.length as usize) {
                        Ok(bytes) => content.extend_from_slice(&bytes),
                        Err(_) => {
                            report.problems.push(Problem {
                                name: data_ptr.name,
                                kind: ProblemKind::Corrupt,
                            });
                            dir_content = None;
                        }
                    }
                }
            }
            BlockReference::NameOnly(name) => {
                check_block(name, store, seen, report)?;
                // A blinded extent makes directory content unreadable.
                dir_content = None;
            }
        }
    }

    if let Some(content) = dir_content {
        match crate::fs::dirfmt::parse_entries(&content) {
            Ok(entries) => {
                for entry in entries {
                    followups.push(BlockReference::Full(entry.pointer));
                }
            }
            Err(_) => report.problems.push(Problem {
                name: ptr.name,
                kind: ProblemKind::Malformed,
            }),
        }
    }

    Ok(Some(followups))
}

//! Canonical directory content encoding.
//!
//! A directory's logical content is a sorted entry table:
//!
//! ```text
//! [entry count uvarint]
//! per entry: [name length uvarint] [name bytes] [kind byte] [child pointer, 85 bytes]
//! ```
//!
//! Entries are sorted by name bytes and names are unique, so two
//! directories with the same children encode to the same bytes and
//! dedupe regardless of insertion order.

use crate::crypto::{BlockPointer, POINTER_LEN};
use crate::dag::ObjectKind;
use crate::error::{Error, Result};
use crate::util::{write_uvarint, ByteReader};

const KIND_FILE: u8 = 0x01;
const KIND_DIR: u8 = 0x02;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct RawEntry {
    pub name: String,
    pub kind: ObjectKind,
    pub pointer: BlockPointer,
}

/// Encode entries canonically. Input order does not matter; output is
/// sorted by name bytes.
pub(crate) fn encode_entries(entries: &[RawEntry]) -> Vec<u8> {
    let mut sorted: Vec<&RawEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| a.name.as_bytes().cmp(b.name.as_bytes()));

    let mut buf = Vec::new();
    write_uvarint(&mut buf, sorted.len() as u64);
    for entry in sorted {
        write_uvarint(&mut buf, entry.name.len() as u64);
        buf.extend_from_slice(entry.name.as_bytes());
        buf.push(match entry.kind {
            ObjectKind::File => KIND_FILE,
            ObjectKind::Directory => KIND_DIR,
        });
        buf.extend_from_slice(&entry.pointer.encode());
    }
    buf
}

pub(crate) fn parse_entries(bytes: &[u8]) -> Result<Vec<RawEntry>> {
    let mut r = ByteReader::new(bytes, "directory content");
    let count = r.uvarint()?;
    let mut entries = Vec::with_capacity(count.min(1 << 16) as usize);
    let mut last_name: Option<Vec<u8>> = None;
    for _ in 0..count {
        let name_len = r.uvarint()? as usize;
        let name_bytes = r.take(name_len)?.to_vec();
        if let Some(prev) = &last_name {
            if *prev >= name_bytes {
                return Err(Error::malformed(
                    "directory content",
                    "entries out of order or duplicated",
                ));
            }
        }
        let name = String::from_utf8(name_bytes.clone())
            .map_err(|_| Error::malformed("directory content", "entry name is not UTF-8"))?;
        super::validate_name(&name)
            .map_err(|_| Error::malformed("directory content", format!("bad name {name:?}")))?;
        let kind = match r.u8()? {
            KIND_FILE => ObjectKind::File,
            KIND_DIR => ObjectKind::Directory,
            other => {
                return Err(Error::malformed(
                    "directory content",
                    format!("unknown entry kind 0x{other:02x}"),
                ))
            }
        };
        let pointer = BlockPointer::decode(r.take(POINTER_LEN)?)?;
        last_name = Some(name_bytes);
        entries.push(RawEntry {
            name,
            kind,
            pointer,
        });
    }
    if r.remaining() != 0 {
        return Err(Error::malformed(
            "directory content",
            "trailing bytes after entry table",
        ));
    }
    Ok(entries)
}

//! Copy-on-write byte overlay over a base version.
//!
//! A `Blob` is the mutable content engine shared by files and
//! directories: a base extent list (possibly empty) plus an overlay of
//! written byte runs. Reads merge overlay over base; writes never touch
//! the store. `persist_extents` walks the block grid and reuses the base
//! extent for every block the session left untouched, so k dirtied
//! blocks cost exactly k new data blocks.
//!
//! Shrinking drops the tail of the base from view permanently
//! (`base_visible`): growing the blob again yields zeros, not
//! resurrected base bytes.
//!
//! Blind (name-only) base extents are preserved through persists as long
//! as they stay untouched. Writing over one is allowed only if the write
//! (plus earlier writes) shadows the entire visible extent; a partial
//! overwrite would need the hidden bytes and fails with `Redacted`, as
//! does reading or persisting a partially truncated blind extent.

use std::collections::BTreeMap;

use crate::crypto::{self, Padding};
use crate::dag::{BlockReference, Extent};
use crate::error::{Error, Result};
use crate::store::BlockStore;

#[derive(Debug, Clone)]
pub(crate) struct Blob {
    base: Vec<Extent>,
    base_visible: u64,
    size: u64,
    overlay: BTreeMap<u64, Vec<u8>>,
}

impl Blob {
    pub fn empty() -> Self {
        Blob {
            base: Vec::new(),
            base_visible: 0,
            size: 0,
            overlay: BTreeMap::new(),
        }
    }

    pub fn from_extents(extents: Vec<Extent>) -> Self {
        let size = extents.iter().map(|e| e.length).sum();
        Blob {
            base: extents,
            base_visible: size,
            size,
            overlay: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> u64 {
        self.size
    }

    pub fn is_dirty(&self) -> bool {
        let base_total: u64 = self.base.iter().map(|e| e.length).sum();
        !self.overlay.is_empty() || self.size != base_total || self.base_visible < base_total
    }

    /// Overlay-free sub-ranges of `[start, end)`, in order.
    fn uncovered(&self, start: u64, end: u64) -> Vec<(u64, u64)> {
        let mut gaps = Vec::new();
        let mut pos = start;
        let scan_from = self
            .overlay
            .range(..start)
            .next_back()
            .map(|(&s, _)| s)
            .unwrap_or(start);
        for (&s, v) in self.overlay.range(scan_from..end) {
            let e = s + v.len() as u64;
            if e <= pos {
                continue;
            }
            if s > pos {
                gaps.push((pos, s.min(end)));
            }
            pos = pos.max(e);
            if pos >= end {
                break;
            }
        }
        if pos < end {
            gaps.push((pos, end));
        }
        gaps
    }

    fn overlay_overlaps(&self, start: u64, end: u64) -> bool {
        if let Some((&s, v)) = self.overlay.range(..start).next_back() {
            if s + v.len() as u64 > start {
                return true;
            }
        }
        self.overlay.range(start..end).next().is_some()
    }

    /// Read base bytes for `[offset, offset+len)`; the range must lie
    /// within the base. Blind extents yield `Redacted`.
    fn read_base(&self, store: &dyn BlockStore, offset: u64, len: u64) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(len as usize);
        let end = offset + len;
        let mut pos = 0u64;
        for extent in &self.base {
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

    pub fn read(&self, store: &dyn BlockStore, offset: u64, len: u64) -> Result<Vec<u8>> {
        let end = offset.checked_add(len).ok_or(Error::OutOfRange {
            offset,
            len,
            size: self.size,
        })?;
        if end > self.size {
            return Err(Error::OutOfRange {
                offset,
                len,
                size: self.size,
            });
        }
        let mut out = vec![0u8; len as usize];
        for (gs, ge) in self.uncovered(offset, end) {
            let be = ge.min(self.base_visible);
            if gs >= be {
                continue; // hole: stays zero
            }
            let bytes = self.read_base(store, gs, be - gs)?;
            let at = (gs - offset) as usize;
            out[at..at + bytes.len()].copy_from_slice(&bytes);
        }
        for (&s, v) in self.overlay.range(..end) {
            let e = s + v.len() as u64;
            if e <= offset {
                continue;
            }
            let from = offset.max(s);
            let to = end.min(e);
            out[(from - offset) as usize..(to - offset) as usize]
                .copy_from_slice(&v[(from - s) as usize..(to - s) as usize]);
        }
        Ok(out)
    }

    /// Reject writes that would leave a visible blind extent partially
    /// shadowed: its hidden bytes could never be materialized again.
    fn check_blind_coverage(&self, w_start: u64, w_end: u64) -> Result<()> {
        let mut pos = 0u64;
        for extent in &self.base {
            let e_start = pos;
            let e_end = pos + extent.length;
            pos = e_end;
            if extent.reference.is_readable() {
                continue;
            }
            let vis_end = e_end.min(self.base_visible);
            if e_start >= vis_end {
                continue;
            }
            if w_end <= e_start || w_start >= vis_end {
                continue;
            }
            for (gs, ge) in self.uncovered(e_start, vis_end) {
                if gs < w_start || ge > w_end {
                    return Err(Error::Redacted);
                }
            }
        }
        Ok(())
    }

    pub fn write(&mut self, offset: u64, data: &[u8]) -> Result<()> {
        if data.is_empty() {
            return Ok(());
        }
        let end = offset
            .checked_add(data.len() as u64)
            .ok_or(Error::OutOfRange {
                offset,
                len: data.len() as u64,
                size: self.size,
            })?;
        self.check_blind_coverage(offset, end)?;

        // Carve out the runs the new one overlaps.
        if let Some((&s, v)) = self.overlay.range(..offset).next_back() {
            let e = s + v.len() as u64;
            if e > offset {
                let v = self.overlay.remove(&s).unwrap();
                if e > end {
                    self.overlay.insert(end, v[(end - s) as usize..].to_vec());
                }
                self.overlay.insert(s, v[..(offset - s) as usize].to_vec());
            }
        }
        let starts: Vec<u64> = self.overlay.range(offset..end).map(|(&s, _)| s).collect();
        for s in starts {
            let v = self.overlay.remove(&s).unwrap();
            let e = s + v.len() as u64;
            if e > end {
                self.overlay.insert(end, v[(end - s) as usize..].to_vec());
            }
        }
        self.overlay.insert(offset, data.to_vec());
        self.size = self.size.max(end);
        Ok(())
    }

    pub fn truncate(&mut self, new_size: u64) {
        if new_size < self.size {
            let cut: Vec<u64> = self.overlay.range(new_size..).map(|(&s, _)| s).collect();
            for s in cut {
                self.overlay.remove(&s);
            }
            if let Some((&s, v)) = self.overlay.range(..new_size).next_back() {
                if s + v.len() as u64 > new_size {
                    let keep = (new_size - s) as usize;
                    self.overlay.get_mut(&s).unwrap().truncate(keep);
                }
            }
            self.base_visible = self.base_visible.min(new_size);
        }
        self.size = new_size;
    }

    /// Materialize the current content as a block-grid extent list,
    /// writing new blocks only where the session touched bytes.
    pub fn persist_extents(&self, store: &dyn BlockStore, pad: Padding) -> Result<Vec<Extent>> {
        let bs = store.block_size() as u64;

        // Base extents indexed by grid slot, valid as long as the grid
        // lines up (every extent before the last must be a full block).
        let mut by_grid: Vec<Extent> = Vec::new();
        for e in &self.base {
            by_grid.push(*e);
            if e.length != bs {
                break;
            }
        }

        let mut extents = Vec::new();
        let count = self.size.div_ceil(bs);
        for i in 0..count {
            let start = i * bs;
            let end = (start + bs).min(self.size);
            let slice_len = end - start;
            if let Some(e) = by_grid.get(i as usize) {
                if e.length == slice_len
                    && end <= self.base_visible
                    && !self.overlay_overlaps(start, end)
                {
                    extents.push(*e);
                    continue;
                }
            }
            let bytes = self.read(store, start, slice_len)?;
            let (block, ptr) = crypto::seal(&bytes, pad, store.block_size())?;
            store.put(&block)?;
            extents.push(Extent {
                reference: BlockReference::Full(ptr),
                length: slice_len,
            });
        }
        Ok(extents)
    }

    /// Adopt a freshly persisted extent list as the new base.
    pub fn rebase(&mut self, extents: Vec<Extent>) {
        let total: u64 = extents.iter().map(|e| e.length).sum();
        debug_assert_eq!(total, self.size);
        self.base = extents;
        self.base_visible = total;
        self.overlay.clear();
    }
}

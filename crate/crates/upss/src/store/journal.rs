//! Append-only write-ahead journal for the caching store.
//!
//! Record layout, fixed for compatibility:
//!
//! ```text
//! [8-byte BE sequence][1-byte hash tag][64-byte digest]
//! [4-byte BE payload length][payload]
//! ```
//!
//! A sidecar checkpoint file `<journal>.ckpt` holds the byte offset of the
//! first undrained record and the next sequence number, updated only
//! after the far store has acknowledged a batch. Replay after a crash may
//! therefore re-deliver acknowledged records, which is harmless because
//! block puts are idempotent. A torn tail from a crash mid-append is
//! detected on open and truncated away.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::crypto::BlockName;
use crate::error::{Error, Result};

const RECORD_HEADER: usize = 8 + BlockName::ENCODED_LEN + 4;
const MAX_PAYLOAD: u32 = 16 << 20;

pub struct Journal {
    inner: Mutex<Inner>,
    ckpt_path: PathBuf,
    sync: bool,
}

struct Inner {
    file: File,
    /// End of valid records.
    end: u64,
    /// Offset of the first undrained record.
    checkpoint: u64,
    next_seq: u64,
    pending: u64,
}

#[derive(Clone)]
pub struct JournalRecord {
    pub seq: u64,
    pub name: BlockName,
    pub payload: Vec<u8>,
    end_offset: u64,
}

impl Journal {
    /// Open or create a journal. Scans undrained records so that
    /// `pending()` is accurate immediately, truncating any torn tail.
    pub fn open(path: impl AsRef<Path>, sync: bool) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let ckpt_path = path.with_extension("ckpt");
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(&path)?;

        let (mut checkpoint, mut next_seq) = read_checkpoint(&ckpt_path)?;
        let file_len = file.metadata()?.len();
        if checkpoint > file_len {
            // Checkpoint ahead of a shorter file means the journal was
            // reset; start over.
            checkpoint = 0;
        }

        // Walk records from the checkpoint to find the valid end.
        let mut buf = Vec::new();
        file.seek(SeekFrom::Start(checkpoint))?;
        (&mut file)
            .take(file_len - checkpoint)
            .read_to_end(&mut buf)?;

        let mut pending = 0u64;
        let mut good = 0usize;
        while buf.len() - good >= RECORD_HEADER {
            let header = &buf[good..good + RECORD_HEADER];
            let seq = u64::from_be_bytes(header[..8].try_into().unwrap());
            let name_ok = BlockName::decode(&header[8..8 + BlockName::ENCODED_LEN]).is_ok();
            let len = u32::from_be_bytes(header[RECORD_HEADER - 4..].try_into().unwrap());
            if !name_ok || len > MAX_PAYLOAD {
                break;
            }
            let total = RECORD_HEADER + len as usize;
            if buf.len() - good < total {
                break;
            }
            good += total;
            pending += 1;
            if seq >= next_seq {
                next_seq = seq + 1;
            }
        }

        let end = checkpoint + good as u64;
        if end < file_len {
            file.set_len(end)?;
        }
        file.seek(SeekFrom::End(0))?;

        Ok(Journal {
            inner: Mutex::new(Inner {
                file,
                end,
                checkpoint,
                next_seq,
                pending,
            }),
            ckpt_path,
            sync,
        })
    }

    pub fn pending(&self) -> u64 {
        self.inner.lock().unwrap().pending
    }

    pub fn is_empty(&self) -> bool {
        self.pending() == 0
    }

    /// Durably append one record and return its sequence number.
    pub fn append(&self, name: &BlockName, payload: &[u8]) -> Result<u64> {
        let mut inner = self.inner.lock().unwrap();
        let inner = &mut *inner;
        let seq = inner.next_seq;

        let mut record = Vec::with_capacity(RECORD_HEADER + payload.len());
        record.extend_from_slice(&seq.to_be_bytes());
        record.extend_from_slice(&name.encode());
        record.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        record.extend_from_slice(payload);

        inner.file.seek(SeekFrom::Start(inner.end))?;
        inner.file.write_all(&record)?;
        if self.sync {
            inner.file.sync_data()?;
        }

        inner.end += record.len() as u64;
        inner.next_seq += 1;
        inner.pending += 1;
        Ok(seq)
    }

    /// Read up to `max` undrained records, oldest first. Records stay in
    /// the journal until [`Journal::commit`].
    pub fn peek(&self, max: usize) -> Result<Vec<JournalRecord>> {
        let mut inner = self.inner.lock().unwrap();
        let mut out = Vec::new();
        let mut offset = inner.checkpoint;
        let end = inner.end;

        while out.len() < max && offset < end {
            let mut header = [0u8; RECORD_HEADER];
            inner.file.seek(SeekFrom::Start(offset))?;
            inner.file.read_exact(&mut header)?;
            let seq = u64::from_be_bytes(header[..8].try_into().unwrap());
            let name = BlockName::decode(&header[8..8 + BlockName::ENCODED_LEN])?;
            let len = u32::from_be_bytes(header[RECORD_HEADER - 4..].try_into().unwrap());
            let mut payload = vec![0u8; len as usize];
            inner.file.read_exact(&mut payload)?;
            offset += (RECORD_HEADER + len as usize) as u64;
            out.push(JournalRecord {
                seq,
                name,
                payload,
                end_offset: offset,
            });
        }
        Ok(out)
    }

    /// Mark records as drained, through the last record of a `peek`
    /// batch. Space is reclaimed once everything is drained.
    pub fn commit(&self, records: &[JournalRecord]) -> Result<()> {
        let Some(last) = records.last() else {
            return Ok(());
        };
        let mut inner = self.inner.lock().unwrap();
        if last.end_offset > inner.end {
            return Err(Error::malformed("journal", "commit past end"));
        }
        inner.checkpoint = last.end_offset;
        inner.pending = inner.pending.saturating_sub(records.len() as u64);

        if inner.checkpoint == inner.end {
            inner.file.set_len(0)?;
            inner.file.seek(SeekFrom::Start(0))?;
            inner.end = 0;
            inner.checkpoint = 0;
        }
        write_checkpoint(&self.ckpt_path, inner.checkpoint, inner.next_seq)?;
        Ok(())
    }
}

fn read_checkpoint(path: &Path) -> Result<(u64, u64)> {
    match std::fs::read(path) {
        Ok(bytes) if bytes.len() == 16 => {
            let offset = u64::from_be_bytes(bytes[..8].try_into().unwrap());
            let next_seq = u64::from_be_bytes(bytes[8..].try_into().unwrap());
            Ok((offset, next_seq))
        }
        Ok(_) => Ok((0, 0)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok((0, 0)),
        Err(e) => Err(e.into()),
    }
}

fn write_checkpoint(path: &Path, offset: u64, next_seq: u64) -> Result<()> {
    let mut bytes = Vec::with_capacity(16);
    bytes.extend_from_slice(&offset.to_be_bytes());
    bytes.extend_from_slice(&next_seq.to_be_bytes());

    let tmp = path.with_extension("ckpt.tmp");
    let mut f = File::create(&tmp)?;
    f.write_all(&bytes)?;
    f.sync_data()?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

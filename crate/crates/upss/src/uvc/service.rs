use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use crate::crypto::{BlockName, BlockPointer, POINTER_LEN};
use crate::dag::{self, ObjectKind};
use crate::error::{Error, Result};
use crate::net::{opcode, status, Handler, StoreHandler};
use crate::store::BlockStore;

const HEAD_MAGIC: &[u8; 2] = b"UH";
const HEAD_FORMAT: u8 = 0x01;

/// The repository service: a block-store handler extended with the
/// head/push/log opcodes. Pushes are serialized; the accepted-version
/// log is kept in an atomically replaced head file so the repository
/// survives restarts.
pub struct UvcHandler {
    blocks: StoreHandler,
    store: Arc<dyn BlockStore>,
    state: Mutex<Vec<BlockPointer>>,
    head_path: Option<PathBuf>,
}

enum Decision {
    Accepted,
    Rejected {
        head: Option<BlockPointer>,
        reason: String,
    },
}

impl UvcHandler {
    /// A repository over `store`, persisting its log to `head_path`
    /// (`None` keeps it in memory only, for tests).
    pub fn open(store: Arc<dyn BlockStore>, head_path: Option<PathBuf>) -> Result<Self> {
        let log = match &head_path {
            Some(path) if path.exists() => load_head_file(&fs::read(path)?)?,
            _ => Vec::new(),
        };
        Ok(UvcHandler {
            blocks: StoreHandler::new(store.clone()),
            store,
            state: Mutex::new(log),
            head_path,
        })
    }

    pub fn head(&self) -> Option<BlockPointer> {
        self.state.lock().unwrap().last().copied()
    }

    pub fn log(&self) -> Vec<BlockPointer> {
        self.state.lock().unwrap().clone()
    }

    fn try_push(&self, expected: Option<BlockName>, proposed: BlockPointer) -> Result<Decision> {
        let mut log = self.state.lock().unwrap();
        let head = log.last().copied();

        let stale = match (&expected, &head) {
            (None, None) => false,
            (Some(e), Some(h)) => *e != h.name,
            _ => true,
        };
        if stale {
            return Ok(Decision::Rejected {
                head,
                reason: "expected parent does not match current head".into(),
            });
        }

        // Structural checks against the shared store: the proposed root
        // must be fetchable and chain to the head in one hop.
        let version = match dag::decode_version(&proposed, &*self.store) {
            Ok(v) => v,
            Err(e) => {
                return Ok(Decision::Rejected {
                    head,
                    reason: format!("proposed version not readable from store: {e}"),
                })
            }
        };
        if version.kind != ObjectKind::Directory {
            return Ok(Decision::Rejected {
                head,
                reason: "proposed root is not a directory".into(),
            });
        }
        let chained = match (&head, &version.prev) {
            (None, None) => true,
            (Some(h), Some(prev)) => prev.name() == h.name,
            _ => false,
        };
        if !chained {
            return Ok(Decision::Rejected {
                head,
                reason: "proposed version is not based on the current head".into(),
            });
        }

        log.push(proposed);
        if let Err(e) = self.save(&log) {
            log.pop();
            return Err(e);
        }
        Ok(Decision::Accepted)
    }

    fn save(&self, log: &[BlockPointer]) -> Result<()> {
        let Some(path) = &self.head_path else {
            return Ok(());
        };
        let mut bytes = Vec::with_capacity(3 + 4 + log.len() * POINTER_LEN);
        bytes.extend_from_slice(HEAD_MAGIC);
        bytes.push(HEAD_FORMAT);
        bytes.extend_from_slice(&(log.len() as u32).to_be_bytes());
        for ptr in log {
            bytes.extend_from_slice(&ptr.encode());
        }
        let tmp = path.with_extension("uvc-tmp");
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(&bytes)?;
            file.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    fn handle_head(&self) -> (u8, Vec<u8>) {
        match self.head() {
            None => (status::OK, vec![0x00]),
            Some(ptr) => {
                let mut out = vec![0x01];
                out.extend_from_slice(&ptr.encode());
                (status::OK, out)
            }
        }
    }

    fn handle_push(&self, payload: &[u8]) -> (u8, Vec<u8>) {
        let parsed = parse_push(payload);
        let (expected, proposed) = match parsed {
            Ok(p) => p,
            Err(e) => return (status::BAD_REQUEST, e.to_string().into_bytes()),
        };
        match self.try_push(expected, proposed) {
            Ok(Decision::Accepted) => (status::OK, vec![0x01]),
            Ok(Decision::Rejected { head, reason }) => {
                let mut out = vec![0x00];
                match head {
                    Some(ptr) => {
                        out.push(0x01);
                        out.extend_from_slice(&ptr.encode());
                    }
                    None => out.push(0x00),
                }
                out.extend_from_slice(reason.as_bytes());
                (status::OK, out)
            }
            Err(e) => (status::SERVER_ERROR, e.to_string().into_bytes()),
        }
    }

    fn handle_log(&self) -> (u8, Vec<u8>) {
        let log = self.log();
        let mut out = Vec::with_capacity(4 + log.len() * POINTER_LEN);
        out.extend_from_slice(&(log.len() as u32).to_be_bytes());
        for ptr in &log {
            out.extend_from_slice(&ptr.encode());
        }
        (status::OK, out)
    }
}

fn parse_push(payload: &[u8]) -> Result<(Option<BlockName>, BlockPointer)> {
    let malformed = || Error::malformed("push request", "truncated");
    let (expected, rest) = match payload.first() {
        Some(0x00) => (None, &payload[1..]),
        Some(0x01) => {
            if payload.len() < 1 + BlockName::ENCODED_LEN {
                return Err(malformed());
            }
            let name = BlockName::decode(&payload[1..1 + BlockName::ENCODED_LEN])?;
            (Some(name), &payload[1 + BlockName::ENCODED_LEN..])
        }
        _ => return Err(malformed()),
    };
    if rest.len() != POINTER_LEN {
        return Err(Error::malformed(
            "push request",
            format!("expected {POINTER_LEN}-byte pointer, got {}", rest.len()),
        ));
    }
    Ok((expected, BlockPointer::decode(rest)?))
}

fn load_head_file(bytes: &[u8]) -> Result<Vec<BlockPointer>> {
    if bytes.len() < 7 || &bytes[..2] != HEAD_MAGIC {
        return Err(Error::malformed("repository head file", "bad magic"));
    }
    if bytes[2] != HEAD_FORMAT {
        return Err(Error::malformed(
            "repository head file",
            format!("unknown format version 0x{:02x}", bytes[2]),
        ));
    }
    let count = u32::from_be_bytes(bytes[3..7].try_into().unwrap()) as usize;
    let body = &bytes[7..];
    if body.len() != count * POINTER_LEN {
        return Err(Error::malformed("repository head file", "truncated log"));
    }
    let mut log = Vec::with_capacity(count);
    for chunk in body.chunks_exact(POINTER_LEN) {
        log.push(BlockPointer::decode(chunk)?);
    }
    Ok(log)
}

impl Handler for UvcHandler {
    fn handle(&self, op: u8, payload: &[u8]) -> (u8, Vec<u8>) {
        match op {
            opcode::UVC_HEAD => self.handle_head(),
            opcode::UVC_PUSH => self.handle_push(payload),
            opcode::UVC_LOG => self.handle_log(),
            other => self.blocks.handle(other, payload),
        }
    }
}

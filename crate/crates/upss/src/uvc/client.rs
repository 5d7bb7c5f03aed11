use std::sync::Arc;

use crate::crypto::{BlockName, BlockPointer, POINTER_LEN};
use crate::error::{Error, Result};
use crate::net::{opcode, status, RemoteStore};

/// Result of a push attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PushOutcome {
    Accepted,
    /// The server refused; `head` is its current head (if any) so the
    /// client can pull and rebase.
    Rejected {
        head: Option<BlockPointer>,
        reason: String,
    },
}

/// Client for a repository endpoint. The same endpoint also serves the
/// shared block store; [`UvcClient::remote_store`] exposes it.
pub struct UvcClient {
    remote: Arc<RemoteStore>,
}

impl UvcClient {
    pub fn new(addr: impl Into<String>) -> Self {
        UvcClient {
            remote: Arc::new(RemoteStore::new(addr)),
        }
    }

    /// The block-store view of the same endpoint.
    pub fn remote_store(&self) -> Arc<RemoteStore> {
        self.remote.clone()
    }

    fn call(&self, op: u8, payload: &[u8]) -> Result<Vec<u8>> {
        let (status_byte, body) = self.remote.request(op, payload)?;
        match status_byte {
            status::OK => Ok(body),
            status::BAD_REQUEST => Err(Error::Protocol(String::from_utf8_lossy(&body).into())),
            _ => Err(Error::Server(String::from_utf8_lossy(&body).into())),
        }
    }

    /// The current accepted head, if the repository has one.
    pub fn head(&self) -> Result<Option<BlockPointer>> {
        let body = self.call(opcode::UVC_HEAD, &[])?;
        match body.first() {
            Some(0x00) => Ok(None),
            Some(0x01) if body.len() == 1 + POINTER_LEN => {
                Ok(Some(BlockPointer::decode(&body[1..])?))
            }
            _ => Err(Error::Protocol("malformed head response".into())),
        }
    }

    /// Propose `proposed` as the next head. `expected` must name the
    /// head this version was built on (absent for the first push).
    pub fn push(
        &self,
        proposed: &BlockPointer,
        expected: Option<&BlockName>,
    ) -> Result<PushOutcome> {
        let mut payload = Vec::with_capacity(1 + BlockName::ENCODED_LEN + POINTER_LEN);
        match expected {
            None => payload.push(0x00),
            Some(name) => {
                payload.push(0x01);
                payload.extend_from_slice(&name.encode());
            }
        }
        payload.extend_from_slice(&proposed.encode());

        let body = self.call(opcode::UVC_PUSH, &payload)?;
        match body.first() {
            Some(0x01) => Ok(PushOutcome::Accepted),
            Some(0x00) => {
                let (head, rest) = match body.get(1) {
                    Some(0x00) => (None, &body[2..]),
                    Some(0x01) if body.len() >= 2 + POINTER_LEN => (
                        Some(BlockPointer::decode(&body[2..2 + POINTER_LEN])?),
                        &body[2 + POINTER_LEN..],
                    ),
                    _ => return Err(Error::Protocol("malformed push response".into())),
                };
                Ok(PushOutcome::Rejected {
                    head,
                    reason: String::from_utf8_lossy(rest).into(),
                })
            }
            _ => Err(Error::Protocol("malformed push response".into())),
        }
    }

    /// All accepted versions, oldest first.
    pub fn log(&self) -> Result<Vec<BlockPointer>> {
        let body = self.call(opcode::UVC_LOG, &[])?;
        if body.len() < 4 {
            return Err(Error::Protocol("malformed log response".into()));
        }
        let count = u32::from_be_bytes(body[..4].try_into().unwrap()) as usize;
        let rest = &body[4..];
        if rest.len() != count * POINTER_LEN {
            return Err(Error::Protocol("malformed log response".into()));
        }
        rest.chunks_exact(POINTER_LEN)
            .map(BlockPointer::decode)
            .collect()
    }
}

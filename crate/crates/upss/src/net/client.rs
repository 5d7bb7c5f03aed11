use std::io::{BufReader, BufWriter};
use std::net::TcpStream;
use std::sync::Mutex;

use crate::crypto::{self, BlockName, DEFAULT_BLOCK_SIZE};
use crate::error::{Error, Result};
use crate::net::frame::{self, status};
use crate::net::opcode;
use crate::store::{verify_block, BlockStore};

/// Client side of the wire protocol, implementing the store contract
/// against a remote server. Connects lazily and reconnects after
/// transport errors on the next call.
///
/// The server is untrusted: `get` re-hashes every block against the
/// requested name and `put` checks the returned name against a locally
/// computed one, so substituted or corrupted blocks surface as
/// [`Error::Integrity`].
pub struct RemoteStore {
    addr: String,
    conn: Mutex<Option<Connection>>,
    meta: Mutex<Option<(usize, bool)>>,
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl RemoteStore {
    /// Create a client for `addr` without connecting yet.
    pub fn new(addr: impl Into<String>) -> Self {
        RemoteStore {
            addr: addr.into(),
            conn: Mutex::new(None),
            meta: Mutex::new(None),
        }
    }

    /// Create a client and verify the server is reachable by fetching its
    /// metadata.
    pub fn connect(addr: impl Into<String>) -> Result<Self> {
        let store = Self::new(addr);
        store.meta()?;
        Ok(store)
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    /// One request, one response. Transport failures drop the connection
    /// so the next call dials again.
    pub(crate) fn request(&self, op: u8, payload: &[u8]) -> Result<(u8, Vec<u8>)> {
        let mut guard = self.conn.lock().unwrap();
        if guard.is_none() {
            let stream = TcpStream::connect(&self.addr)?;
            stream.set_nodelay(true)?;
            let reader = BufReader::new(stream.try_clone()?);
            let writer = BufWriter::new(stream);
            *guard = Some(Connection { reader, writer });
        }
        let conn = guard.as_mut().expect("connection just established");
        let result = Self::exchange(conn, op, payload);
        if result.is_err() {
            *guard = None;
        }
        result
    }

    fn exchange(conn: &mut Connection, op: u8, payload: &[u8]) -> Result<(u8, Vec<u8>)> {
        frame::write_frame(&mut conn.writer, op, payload)?;
        match frame::read_frame(&mut conn.reader)? {
            Some(response) => Ok(response),
            None => Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::ConnectionAborted,
                "server closed the connection",
            ))),
        }
    }

    /// Remote `(block_size, is_persistent)`, cached after the first
    /// successful query.
    pub fn meta(&self) -> Result<(usize, bool)> {
        if let Some(meta) = *self.meta.lock().unwrap() {
            return Ok(meta);
        }
        let (st, payload) = self.request(opcode::BLOCK_SIZE, &[])?;
        let size = match (st, payload.len()) {
            (status::OK, 4) => {
                u32::from_be_bytes(payload[..4].try_into().unwrap()) as usize
            }
            _ => return Err(remote_error(st, &payload)),
        };
        let (st, payload) = self.request(opcode::IS_PERSISTENT, &[])?;
        let persistent = match (st, payload.len()) {
            (status::OK, 1) => payload[0] != 0,
            _ => return Err(remote_error(st, &payload)),
        };
        *self.meta.lock().unwrap() = Some((size, persistent));
        Ok((size, persistent))
    }
}

fn remote_error(st: u8, payload: &[u8]) -> Error {
    let message = String::from_utf8_lossy(payload).into_owned();
    match st {
        status::BAD_REQUEST => Error::Protocol(message),
        _ => Error::Server(message),
    }
}

impl BlockStore for RemoteStore {
    fn put(&self, block: &[u8]) -> Result<BlockName> {
        let expected = crypto::hash_block(block);
        let (st, payload) = self.request(opcode::PUT, block)?;
        if st != status::OK {
            return Err(remote_error(st, &payload));
        }
        let name = BlockName::decode(&payload)?;
        if name != expected {
            return Err(Error::Integrity {
                expected,
                actual: name,
            });
        }
        Ok(name)
    }

    fn get(&self, name: &BlockName) -> Result<Vec<u8>> {
        let (st, payload) = self.request(opcode::GET, &name.encode())?;
        match st {
            status::OK => {
                verify_block(name, &payload)?;
                Ok(payload)
            }
            status::NOT_FOUND => Err(Error::NotFound(*name)),
            _ => Err(remote_error(st, &payload)),
        }
    }

    fn block_size(&self) -> usize {
        self.meta().map(|(size, _)| size).unwrap_or(DEFAULT_BLOCK_SIZE)
    }

    fn is_persistent(&self) -> bool {
        self.meta().map(|(_, p)| p).unwrap_or(false)
    }
}

use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::crypto::BlockName;
use crate::error::{Error, Result};
use crate::net::frame::{self, opcode, status};
use crate::store::BlockStore;

/// Maps one request to one response. Implementations must not panic on
/// arbitrary payloads; malformed input is a BAD_REQUEST.
pub trait Handler: Send + Sync + 'static {
    fn handle(&self, opcode: u8, payload: &[u8]) -> (u8, Vec<u8>);
}

/// The block-store contract behind the wire protocol.
pub struct StoreHandler {
    store: Arc<dyn BlockStore>,
}

impl StoreHandler {
    pub fn new(store: Arc<dyn BlockStore>) -> Self {
        StoreHandler { store }
    }

    pub fn store(&self) -> &Arc<dyn BlockStore> {
        &self.store
    }
}

pub(crate) fn error_response(e: &Error) -> (u8, Vec<u8>) {
    let st = match e {
        Error::NotFound(_) => status::NOT_FOUND,
        Error::BlockSize { .. } | Error::Malformed { .. } | Error::Protocol(_) => {
            status::BAD_REQUEST
        }
        _ => status::SERVER_ERROR,
    };
    (st, e.to_string().into_bytes())
}

impl Handler for StoreHandler {
    fn handle(&self, op: u8, payload: &[u8]) -> (u8, Vec<u8>) {
        let result = match op {
            opcode::PUT => self.store.put(payload).map(|name| name.encode()),
            opcode::GET => BlockName::decode(payload).and_then(|name| self.store.get(&name)),
            opcode::BLOCK_SIZE => Ok((self.store.block_size() as u32).to_be_bytes().to_vec()),
            opcode::IS_PERSISTENT => Ok(vec![self.store.is_persistent() as u8]),
            other => Err(Error::Protocol(format!("unknown opcode 0x{other:02x}"))),
        };
        match result {
            Ok(payload) => (status::OK, payload),
            Err(e) => error_response(&e),
        }
    }
}

/// A running TCP service. Stops accepting when dropped; established
/// connections run until their client disconnects.
pub struct Server {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl Server {
    /// Bind `addr` (e.g. `127.0.0.1:0` for an ephemeral port) and serve
    /// `handler` on it, one thread per connection.
    pub fn start(handler: Arc<dyn Handler>, addr: &str) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));

        let accept_shutdown = Arc::clone(&shutdown);
        let accept_thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if accept_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let handler = Arc::clone(&handler);
                std::thread::spawn(move || serve_connection(stream, handler));
            }
        });

        Ok(Server {
            addr,
            shutdown,
            accept_thread: Some(accept_thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

fn serve_connection(mut stream: TcpStream, handler: Arc<dyn Handler>) {
    let _unused = stream.set_nodelay(true);
    loop {
        let (op, payload) = match frame::read_frame(&mut stream) {
            Ok(Some(f)) => f,
            Ok(None) | Err(_) => return,
        };
        let (st, response) = handler.handle(op, &payload);
        if frame::write_frame(&mut stream, st, &response).is_err() {
            return;
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop with a throwaway connection.
        let _unused = TcpStream::connect(self.addr);
        if let Some(t) = self.accept_thread.take() {
            let _unused = t.join();
        }
    }
}

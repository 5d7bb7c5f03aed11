//! Block stores over TCP.
//!
//! The protocol is a length-prefixed binary framing with one request and
//! one response per frame:
//!
//! ```text
//! request:  [4-byte BE payload length][1-byte opcode][payload]
//! response: [4-byte BE payload length][1-byte status][payload]
//! ```
//!
//! Opcodes `0x01..=0x04` carry the block-store contract (PUT, GET,
//! BLOCK_SIZE, IS_PERSISTENT); `0x10..=0x12` carry the version-control
//! service (HEAD, PUSH, LOG). Status is `0x00` OK, `0x01` NOT_FOUND,
//! `0x02` BAD_REQUEST, `0x03` SERVER_ERROR; error payloads are UTF-8
//! messages.
//!
//! There is deliberately no transport encryption or authentication: block
//! payloads are ciphertext already, names reveal nothing, and the server
//! is oblivious to users. A client never trusts the server: every block
//! fetched over the wire is re-hashed against the requested name.

mod client;
mod frame;
mod server;
pub mod testing;

pub use client::RemoteStore;
pub use frame::{opcode, status};
pub use server::{Handler, Server, StoreHandler};

//! Adversarial server handlers for integrity tests.

use std::sync::Arc;

use crate::crypto::BlockName;
use crate::net::frame::{opcode, status};
use crate::net::server::{error_response, Handler};
use crate::store::{BlockStore, MemoryStore};

/// A malicious block server: stores honestly but answers every GET with
/// the bytes of a different (valid, same-size) block when it can, or
/// with tampered bytes when it holds nothing else. Clients that verify
/// names catch it every time.
pub struct ByzantineHandler {
    store: Arc<MemoryStore>,
}

impl ByzantineHandler {
    pub fn new(store: Arc<MemoryStore>) -> Self {
        ByzantineHandler { store }
    }
}

impl Handler for ByzantineHandler {
    fn handle(&self, op: u8, payload: &[u8]) -> (u8, Vec<u8>) {
        match op {
            opcode::GET => {
                let Ok(name) = BlockName::decode(payload) else {
                    return (status::BAD_REQUEST, b"bad name".to_vec());
                };
                let substitute = self
                    .store
                    .names()
                    .into_iter()
                    .filter(|candidate| *candidate != name)
                    .min();
                match substitute {
                    Some(other) => match self.store.get(&other) {
                        Ok(bytes) => (status::OK, bytes),
                        Err(e) => error_response(&e),
                    },
                    None => match self.store.get(&name) {
                        Ok(mut bytes) => {
                            bytes[0] ^= 0xff;
                            (status::OK, bytes)
                        }
                        Err(e) => error_response(&e),
                    },
                }
            }
            opcode::PUT => match self.store.put(payload) {
                Ok(name) => (status::OK, name.encode()),
                Err(e) => error_response(&e),
            },
            opcode::BLOCK_SIZE => (
                status::OK,
                (self.store.block_size() as u32).to_be_bytes().to_vec(),
            ),
            opcode::IS_PERSISTENT => (status::OK, vec![0]),
            _ => (status::BAD_REQUEST, b"unknown opcode".to_vec()),
        }
    }
}

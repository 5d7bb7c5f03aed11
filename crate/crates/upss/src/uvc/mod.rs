//! UVC: private version control over shared block storage.
//!
//! Clients keep source trees as UPSS directories in a block store they
//! share with a small repository service. The service never sees
//! plaintext: it stores the pointer of the currently accepted root
//! version and serializes pushes with a compare-and-swap rule, so
//! accepted versions form one linear chain. Everything else (content,
//! history, dedup) is ordinary filesystem machinery.
//!
//! The repository protocol rides the block-store framing with three
//! extra opcodes:
//!
//! ```text
//! UVC_HEAD  request: empty
//!           response: [0x00]  |  [0x01][head pointer, 85 bytes]
//! UVC_PUSH  request: [0x00] | [0x01][expected head name, 65 bytes],
//!           then [proposed pointer, 85 bytes]
//!           response: [0x01] accepted
//!                     [0x00][0x00 | 0x01 + head pointer][reason, UTF-8]
//! UVC_LOG   request: empty
//!           response: [count, u32 BE][count x pointer, oldest first]
//! ```
//!
//! A push is accepted only if the expected head name matches the
//! current head and the proposed version's `prev` resolves to that
//! head (no expected name and no `prev` for the first push).

mod client;
mod service;
mod tree;

pub use client::{PushOutcome, UvcClient};
pub use service::UvcHandler;
pub use tree::{ingest_tree, ingest_tree_except, materialize, AddReport};

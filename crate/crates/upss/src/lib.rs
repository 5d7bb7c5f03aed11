//! UPSS: user-centric private storage.
//!
//! Data lives as fixed-size, convergently encrypted blocks in untrusted
//! block stores. A block is named by the hash of its ciphertext and
//! decrypted by a key derived from its plaintext, so a `(name, key)` block
//! pointer is both the address of a block and the capability to read it.
//! Files and directories are Merkle DAGs of such blocks described by
//! immutable `Version` manifests; mutation is copy-on-write and produces a
//! new version chained to the old one.
//!
//! The crate is organised in layers:
//!
//! * [`crypto`]: convergent sealing/opening of single blocks and the block
//!   pointer codec.
//! * [`store`]: the block-store contract plus in-memory, file-backed,
//!   write-back caching and mirrored implementations.
//! * [`net`]: a block store served over TCP and a client that speaks the
//!   same contract.
//! * [`dag`]: immutable version manifests, content reads, history walks
//!   and integrity verification.
//! * [`fs`]: mutable file and directory objects layered over versions,
//!   with redaction and diff.
//! * [`vault`]: the passphrase-protected file that stores a root pointer.
//! * [`uvc`]: a version-control service that linearizes root versions.

pub mod crypto;
pub mod dag;
pub mod error;
pub mod fs;
pub mod net;
pub mod store;
pub mod uvc;
pub mod vault;

mod util;

pub use crypto::{BlockKey, BlockName, BlockPointer, CipherAlg, HashAlg, Padding};
pub use dag::{BlockReference, Extent, ObjectKind, Version};
pub use error::{Error, Result};
pub use fs::{DirectoryObject, FileObject};
pub use store::BlockStore;

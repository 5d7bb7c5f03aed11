//! Convergent encryption and block pointers.
//!
//! A plaintext block `B` is sealed by deriving its key from its own
//! content, `k = h(B)` truncated to the cipher key length, encrypting
//! deterministically under `k`, and naming the result by the hash of the
//! ciphertext, `n = h(E_k(B))`. Equal plaintexts therefore produce equal
//! ciphertexts and equal names, which is what makes deduplication work on
//! a store that only ever sees ciphertext. The `(n, k)` pair is a
//! [`BlockPointer`]: the address of the block and the capability to read
//! it.
//!
//! Deterministic encryption is safe here because every key encrypts
//! exactly one plaintext (the one it was derived from), so the all-zero
//! CTR start value is never reused across distinct messages.

use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use cipher::{KeyIvInit, StreamCipher};
use rand::RngCore;
use sha3::{Digest, Sha3_512};

use crate::error::{Error, Result};

type Aes128Ctr = ctr::Ctr128BE<aes::Aes128>;

pub const DEFAULT_BLOCK_SIZE: usize = 4096;

const DIGEST_LEN: usize = 64;
const KEY_LEN: usize = 16;
const POINTER_HEADER_LEN: usize = 5;
/// Encoded pointer length under the default algorithms.
pub const POINTER_LEN: usize = POINTER_HEADER_LEN + DIGEST_LEN + KEY_LEN;

/// Hash algorithm used for block naming and key derivation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HashAlg {
    Sha3_512,
}

impl HashAlg {
    pub fn digest_len(self) -> usize {
        match self {
            HashAlg::Sha3_512 => DIGEST_LEN,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HashAlg::Sha3_512 => "sha3-512",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            HashAlg::Sha3_512 => 0x01,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0x01 => Ok(HashAlg::Sha3_512),
            other => Err(Error::malformed(
                "block pointer",
                format!("unknown hash algorithm tag 0x{other:02x}"),
            )),
        }
    }
}

/// Symmetric cipher used for block encryption.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CipherAlg {
    Aes128,
}

impl CipherAlg {
    pub fn key_len(self) -> usize {
        match self {
            CipherAlg::Aes128 => KEY_LEN,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CipherAlg::Aes128 => "aes-128",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            CipherAlg::Aes128 => 0x01,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0x01 => Ok(CipherAlg::Aes128),
            other => Err(Error::malformed(
                "block pointer",
                format!("unknown cipher algorithm tag 0x{other:02x}"),
            )),
        }
    }
}

/// Content address of one block: the hash of its ciphertext.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockName {
    alg: HashAlg,
    digest: [u8; DIGEST_LEN],
}

impl BlockName {
    pub fn alg(&self) -> HashAlg {
        self.alg
    }

    pub fn digest(&self) -> &[u8] {
        &self.digest
    }

    /// Wire form: algorithm tag followed by the digest.
    pub const ENCODED_LEN: usize = 1 + DIGEST_LEN;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::ENCODED_LEN);
        out.push(self.alg.tag());
        out.extend_from_slice(&self.digest);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::ENCODED_LEN {
            return Err(Error::malformed(
                "block name",
                format!("expected {} bytes, got {}", Self::ENCODED_LEN, bytes.len()),
            ));
        }
        let alg = HashAlg::from_tag(bytes[0])?;
        let mut digest = [0u8; DIGEST_LEN];
        digest.copy_from_slice(&bytes[1..]);
        Ok(BlockName { alg, digest })
    }
}

impl fmt::Display for BlockName {
    /// Textual form, e.g. `sha3-512:hdd3P80...` (base64 of the digest).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.alg.label(), BASE64.encode(self.digest))
    }
}

impl fmt::Debug for BlockName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlockName({})", hex::encode(&self.digest[..6]))
    }
}

impl FromStr for BlockName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (label, b64) = s
            .split_once(':')
            .ok_or_else(|| Error::malformed("block name", "missing algorithm prefix"))?;
        let alg = match label {
            "sha3-512" => HashAlg::Sha3_512,
            other => {
                return Err(Error::malformed(
                    "block name",
                    format!("unknown hash algorithm {other:?}"),
                ))
            }
        };
        let raw = BASE64
            .decode(b64)
            .map_err(|e| Error::malformed("block name", format!("bad base64: {e}")))?;
        if raw.len() != alg.digest_len() {
            return Err(Error::malformed(
                "block name",
                format!("digest is {} bytes, expected {}", raw.len(), alg.digest_len()),
            ));
        }
        let mut digest = [0u8; DIGEST_LEN];
        digest.copy_from_slice(&raw);
        Ok(BlockName { alg, digest })
    }
}

/// Decryption key for one block, derived from the block's plaintext.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockKey {
    alg: CipherAlg,
    key: [u8; KEY_LEN],
}

impl BlockKey {
    pub fn alg(&self) -> CipherAlg {
        self.alg
    }

    pub fn bytes(&self) -> &[u8] {
        &self.key
    }
}

impl fmt::Debug for BlockKey {
    // Never print key material.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlockKey({})", self.alg.label())
    }
}

/// The capability to fetch and read one immutable block.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct BlockPointer {
    pub name: BlockName,
    pub key: BlockKey,
}

impl BlockPointer {
    /// Self-describing binary form: magic `BP`, format version, hash and
    /// cipher tags, digest, key. 85 bytes under the defaults.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(POINTER_LEN);
        out.extend_from_slice(b"BP");
        out.push(0x01);
        out.push(self.name.alg.tag());
        out.push(self.key.alg.tag());
        out.extend_from_slice(&self.name.digest);
        out.extend_from_slice(&self.key.key);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < POINTER_HEADER_LEN {
            return Err(Error::malformed("block pointer", "truncated header"));
        }
        if &bytes[..2] != b"BP" {
            return Err(Error::malformed("block pointer", "bad magic"));
        }
        if bytes[2] != 0x01 {
            return Err(Error::malformed(
                "block pointer",
                format!("unknown format version 0x{:02x}", bytes[2]),
            ));
        }
        let hash = HashAlg::from_tag(bytes[3])?;
        let cipher = CipherAlg::from_tag(bytes[4])?;
        let want = POINTER_HEADER_LEN + hash.digest_len() + cipher.key_len();
        if bytes.len() != want {
            return Err(Error::malformed(
                "block pointer",
                format!("expected {want} bytes, got {}", bytes.len()),
            ));
        }
        let mut digest = [0u8; DIGEST_LEN];
        digest.copy_from_slice(&bytes[POINTER_HEADER_LEN..POINTER_HEADER_LEN + DIGEST_LEN]);
        let mut key = [0u8; KEY_LEN];
        key.copy_from_slice(&bytes[POINTER_HEADER_LEN + DIGEST_LEN..want]);
        Ok(BlockPointer {
            name: BlockName { alg: hash, digest },
            key: BlockKey { alg: cipher, key },
        })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.encode())
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let raw = hex::decode(s.trim())
            .map_err(|e| Error::malformed("block pointer", format!("bad hex: {e}")))?;
        Self::decode(&raw)
    }
}

impl fmt::Display for BlockPointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for BlockPointer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_hex(s)
    }
}

/// How a partial block is filled out to the store's block size.
///
/// `Random` padding resists content guessing for low-entropy data at the
/// cost of convergence for the padded tail; `Deterministic` zero padding
/// keeps sealing fully convergent and is used for metadata blocks and for
/// trees that want maximal deduplication.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Random,
    Deterministic,
}

pub fn hash_block(bytes: &[u8]) -> BlockName {
    let digest = Sha3_512::digest(bytes);
    let mut out = [0u8; DIGEST_LEN];
    out.copy_from_slice(&digest);
    BlockName {
        alg: HashAlg::Sha3_512,
        digest: out,
    }
}

/// `k = h(B)` truncated to the cipher's key length. `plaintext` must be a
/// full padded block.
pub fn derive_key(plaintext: &[u8], _hash: HashAlg, cipher: CipherAlg) -> BlockKey {
    let digest = Sha3_512::digest(plaintext);
    let mut key = [0u8; KEY_LEN];
    key.copy_from_slice(&digest[..cipher.key_len()]);
    BlockKey { alg: cipher, key }
}

fn apply_ctr(key: &BlockKey, data: &mut [u8]) {
    let mut c = Aes128Ctr::new(&key.key.into(), &[0u8; 16].into());
    c.apply_keystream(data);
}

/// Pad `content` to `block_size`, encrypt it convergently, and name the
/// ciphertext. Returns the ciphertext block and its pointer.
pub fn seal(content: &[u8], pad: Padding, block_size: usize) -> Result<(Vec<u8>, BlockPointer)> {
    if content.len() > block_size {
        return Err(Error::Oversize {
            len: content.len(),
            capacity: block_size,
        });
    }
    let mut block = vec![0u8; block_size];
    block[..content.len()].copy_from_slice(content);
    if pad == Padding::Random && content.len() < block_size {
        rand::rng().fill_bytes(&mut block[content.len()..]);
    }
    let key = derive_key(&block, HashAlg::Sha3_512, CipherAlg::Aes128);
    apply_ctr(&key, &mut block);
    let name = hash_block(&block);
    Ok((block, BlockPointer { name, key }))
}

/// Verify `block` against `ptr`, decrypt, and return the first
/// `content_len` bytes.
pub fn open(block: &[u8], ptr: &BlockPointer, content_len: usize) -> Result<Vec<u8>> {
    if content_len > block.len() {
        return Err(Error::OutOfRange {
            offset: 0,
            len: content_len as u64,
            size: block.len() as u64,
        });
    }
    let actual = hash_block(block);
    if actual != ptr.name {
        return Err(Error::Integrity {
            expected: ptr.name,
            actual,
        });
    }
    let mut plain = block.to_vec();
    apply_ctr(&ptr.key, &mut plain);
    plain.truncate(content_len);
    Ok(plain)
}

/// Base-2 logarithm of the expected number of attempts needed to guess a
/// block's plaintext by brute force, given `s_s` secret bytes and `s_p`
/// padding bytes: half the search space, so `8 (s_s + s_p) - 1`.
pub fn expected_guesses(s_s: u64, s_p: u64) -> i128 {
    8 * (s_s as i128 + s_p as i128) - 1
}

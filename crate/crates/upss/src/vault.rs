//! The passphrase vault: a small local file holding the root pointer.
//!
//! Block pointers are capabilities, so the pointer to the root directory
//! is the one secret a user must keep. The vault wraps it in a
//! password-based layer (PKCS #5 v2 key derivation, authenticated
//! encryption) so it can sit on an ordinary disk:
//!
//! ```text
//! "UV" [fmt 0x01] [salt, 16 bytes] [iterations, u32 BE]
//!      [derived key length, 1 byte] [nonce, 12 bytes]
//!      [ciphertext + tag]
//! ```
//!
//! A wrong passphrase fails authentication; it can never yield a
//! plausible-but-wrong pointer. Saves are write-temp-then-rename so a
//! crashed save leaves the previous vault intact.

use std::fs;
use std::io::Write;
use std::path::Path;

use aes_gcm::aead::Aead;
use aes_gcm::{Aes256Gcm, KeyInit};
use pbkdf2::pbkdf2_hmac;
use rand::RngCore;
use sha2::Sha256;

use crate::crypto::{BlockPointer, POINTER_LEN};
use crate::error::{Error, Result};

const MAGIC: &[u8; 2] = b"UV";
const FORMAT: u8 = 0x01;
const SALT_LEN: usize = 16;
const NONCE_LEN: usize = 12;
const KEY_LEN: usize = 32;
const HEADER_LEN: usize = 2 + 1 + SALT_LEN + 4 + 1 + NONCE_LEN;

/// Default PBKDF2 iteration count for new vaults.
pub const DEFAULT_ITERATIONS: u32 = 600_000;

fn derive(passphrase: &str, salt: &[u8; SALT_LEN], iterations: u32) -> [u8; KEY_LEN] {
    let mut key = [0u8; KEY_LEN];
    pbkdf2_hmac::<Sha256>(passphrase.as_bytes(), salt, iterations, &mut key);
    key
}

fn seal_vault(
    passphrase: &str,
    ptr: &BlockPointer,
    iterations: u32,
    salt: [u8; SALT_LEN],
    nonce: [u8; NONCE_LEN],
) -> Result<Vec<u8>> {
    let key = derive(passphrase, &salt, iterations);
    let cipher = Aes256Gcm::new(&key.into());
    let ciphertext = cipher
        .encrypt(&nonce.into(), ptr.encode().as_slice())
        .map_err(|_| Error::Auth)?;

    let mut out = Vec::with_capacity(HEADER_LEN + ciphertext.len());
    out.extend_from_slice(MAGIC);
    out.push(FORMAT);
    out.extend_from_slice(&salt);
    out.extend_from_slice(&iterations.to_be_bytes());
    out.push(KEY_LEN as u8);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&ciphertext);
    Ok(out)
}

fn open_vault(bytes: &[u8], passphrase: &str) -> Result<BlockPointer> {
    if bytes.len() < HEADER_LEN + POINTER_LEN + 16 {
        return Err(Error::malformed("vault file", "truncated"));
    }
    if &bytes[..2] != MAGIC {
        return Err(Error::malformed("vault file", "bad magic"));
    }
    if bytes[2] != FORMAT {
        return Err(Error::malformed(
            "vault file",
            format!("unknown format version 0x{:02x}", bytes[2]),
        ));
    }
    let mut salt = [0u8; SALT_LEN];
    salt.copy_from_slice(&bytes[3..3 + SALT_LEN]);
    let iterations = u32::from_be_bytes(bytes[19..23].try_into().unwrap());
    if iterations == 0 {
        return Err(Error::malformed("vault file", "zero iteration count"));
    }
    if bytes[23] as usize != KEY_LEN {
        return Err(Error::malformed(
            "vault file",
            format!("unsupported key length {}", bytes[23]),
        ));
    }
    let mut nonce = [0u8; NONCE_LEN];
    nonce.copy_from_slice(&bytes[24..24 + NONCE_LEN]);
    let ciphertext = &bytes[HEADER_LEN..];

    let key = derive(passphrase, &salt, iterations);
    let cipher = Aes256Gcm::new(&key.into());
    let plain = cipher
        .decrypt(&nonce.into(), ciphertext)
        .map_err(|_| Error::Auth)?;
    BlockPointer::decode(&plain)
}

/// Save `ptr` to a vault file at `path` under `passphrase`.
pub fn save_root(path: &Path, passphrase: &str, ptr: &BlockPointer) -> Result<()> {
    save_root_with(path, passphrase, ptr, DEFAULT_ITERATIONS)
}

/// As [`save_root`] with an explicit iteration count (tests and
/// benchmarks use lower counts).
pub fn save_root_with(
    path: &Path,
    passphrase: &str,
    ptr: &BlockPointer,
    iterations: u32,
) -> Result<()> {
    let mut salt = [0u8; SALT_LEN];
    rand::rng().fill_bytes(&mut salt);
    let mut nonce = [0u8; NONCE_LEN];
    rand::rng().fill_bytes(&mut nonce);
    let bytes = seal_vault(passphrase, ptr, iterations, salt, nonce)?;

    let tmp = path.with_extension("vault-tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Load the root pointer from the vault file at `path`.
pub fn load_root(path: &Path, passphrase: &str) -> Result<BlockPointer> {
    let bytes = fs::read(path)?;
    open_vault(&bytes, passphrase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{seal, Padding};

    fn sample_ptr() -> BlockPointer {
        seal(
            b"This is some file content!",
            Padding::Deterministic,
            4096,
        )
        .unwrap()
        .1
    }

    const FIXED_SALT: [u8; 16] = [
        0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0a, 0x0b, 0x0c, 0x0d,
        0x0e, 0x0f,
    ];
    const FIXED_NONCE: [u8; 12] = [
        0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0a, 0x0b,
    ];

    #[test]
    fn layout_is_exact() {
        let bytes =
            seal_vault("correct horse", &sample_ptr(), 1000, FIXED_SALT, FIXED_NONCE).unwrap();
        assert_eq!(&bytes[..2], b"UV");
        assert_eq!(bytes[2], 0x01);
        assert_eq!(&bytes[3..19], &FIXED_SALT);
        assert_eq!(&bytes[19..23], &1000u32.to_be_bytes());
        assert_eq!(bytes[23], 32);
        assert_eq!(&bytes[24..36], &FIXED_NONCE);
        assert_eq!(
            hex::encode(&bytes[36..]),
            "17599520fdd3eba8ea73918b89ed416808247949817da642973ff010274be01d\
             34320c4529383060313a57e38945d01b07530ec5fea06d1c72c1692d560e994f\
             ba95ad26e0320dfa98c28adacdea8817464567bf3456b652a8ce5991ac1c7c56\
             cf0ddf65e4"
        );
        assert_eq!(open_vault(&bytes, "correct horse").unwrap(), sample_ptr());
    }

    #[test]
    fn roundtrip_and_fresh_salt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("root.vault");
        let ptr = sample_ptr();

        save_root_with(&path, "hunter2", &ptr, 1000).unwrap();
        let first = fs::read(&path).unwrap();
        assert_eq!(load_root(&path, "hunter2").unwrap(), ptr);

        save_root_with(&path, "hunter2", &ptr, 1000).unwrap();
        let second = fs::read(&path).unwrap();
        assert_ne!(first, second, "salt must be fresh per save");
        assert_eq!(load_root(&path, "hunter2").unwrap(), ptr);
    }

    #[test]
    fn wrong_passphrase_is_auth_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("root.vault");
        save_root_with(&path, "right", &sample_ptr(), 1000).unwrap();
        assert!(matches!(load_root(&path, "wrong"), Err(Error::Auth)));
    }

    #[test]
    fn corrupt_and_truncated_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("root.vault");
        save_root_with(&path, "pw", &sample_ptr(), 1000).unwrap();

        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..20]).unwrap();
        assert!(matches!(
            load_root(&path, "pw"),
            Err(Error::Malformed { .. })
        ));

        let mut flipped = bytes.clone();
        let at = flipped.len() - 5;
        flipped[at] ^= 0xff;
        fs::write(&path, &flipped).unwrap();
        assert!(matches!(load_root(&path, "pw"), Err(Error::Auth)));

        assert!(load_root(&dir.path().join("absent"), "pw").is_err());
    }

    #[test]
    fn pointer_bytes_never_appear_in_clear() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("root.vault");
        let ptr = sample_ptr();
        save_root_with(&path, "pw", &ptr, 1000).unwrap();
        let file = fs::read(&path).unwrap();
        let needle = &ptr.encode()[5..25]; // a slice of the digest
        assert!(!file
            .windows(needle.len())
            .any(|window| window == needle));
    }
}

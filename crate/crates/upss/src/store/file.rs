//! File-backed block store: one file per block under a two-level fan-out
//! directory derived from the first two digest bytes, so no directory
//! ever collects more than 256 entries of fan-out or an unbounded pile of
//! blocks.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::crypto::{self, BlockName, DEFAULT_BLOCK_SIZE};
use crate::error::{Error, Result};
use crate::store::{check_block_size, verify_block, BlockStore};

pub struct FileStore {
    root: PathBuf,
    block_size: usize,
}

impl FileStore {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        Self::open_with_block_size(root, DEFAULT_BLOCK_SIZE)
    }

    pub fn open_with_block_size(root: impl AsRef<Path>, block_size: usize) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        fs::create_dir_all(root.join("tmp"))?;

        let meta = root.join("blocksize");
        match fs::read_to_string(&meta) {
            Ok(text) => {
                let existing: usize = text.trim().parse().map_err(|_| {
                    Error::malformed("store metadata", format!("bad blocksize file: {text:?}"))
                })?;
                if existing != block_size {
                    return Err(Error::BlockSize {
                        expected: existing,
                        actual: block_size,
                    });
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                fs::write(&meta, format!("{block_size}\n"))?;
            }
            Err(e) => return Err(e.into()),
        }

        Ok(FileStore { root, block_size })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn block_path(&self, name: &BlockName) -> PathBuf {
        let digest = name.digest();
        let hex = hex::encode(digest);
        self.root
            .join(format!("{:02x}", digest[0]))
            .join(format!("{:02x}", digest[1]))
            .join(hex)
    }

    /// Bytes of block data on disk (excludes metadata).
    pub fn stored_bytes(&self) -> Result<u64> {
        let mut total = 0u64;
        for fan in fs::read_dir(&self.root)? {
            let fan = fan?;
            if !fan.file_type()?.is_dir() || fan.file_name() == "tmp" {
                continue;
            }
            for sub in fs::read_dir(fan.path())? {
                for block in fs::read_dir(sub?.path())? {
                    total += block?.metadata()?.len();
                }
            }
        }
        Ok(total)
    }
}

impl BlockStore for FileStore {
    fn put(&self, block: &[u8]) -> Result<BlockName> {
        check_block_size(block, self.block_size)?;
        let name = crypto::hash_block(block);
        let path = self.block_path(&name);
        if path.exists() {
            return Ok(name);
        }
        fs::create_dir_all(path.parent().expect("block path has parent"))?;

        // Write to a temp file named after the block and rename into
        // place; concurrent writers of the same block race benignly
        // because both write identical bytes.
        let tmp = self.root.join("tmp").join(hex::encode(name.digest()));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(block)?;
        f.sync_data()?;
        fs::rename(&tmp, &path)?;
        Ok(name)
    }

    fn get(&self, name: &BlockName) -> Result<Vec<u8>> {
        let bytes = match fs::read(self.block_path(name)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(*name))
            }
            Err(e) => return Err(e.into()),
        };
        verify_block(name, &bytes)?;
        Ok(bytes)
    }

    fn block_size(&self) -> usize {
        self.block_size
    }

    fn is_persistent(&self) -> bool {
        true
    }

    fn block_count(&self) -> Option<u64> {
        let mut count = 0u64;
        let fans = std::fs::read_dir(&self.root).ok()?;
        for fan in fans.flatten() {
            if !fan.file_type().ok()?.is_dir() || fan.file_name() == "tmp" {
                continue;
            }
            for sub in std::fs::read_dir(fan.path()).ok()?.flatten() {
                count += std::fs::read_dir(sub.path()).ok()?.count() as u64;
            }
        }
        Some(count)
    }
}

//! Mirrored block store: replicate to every member, read from whichever
//! answers first.

use std::sync::mpsc;
use std::sync::Arc;

use crate::crypto::{self, BlockName};
use crate::error::{Error, Result};
use crate::store::{check_block_size, verify_block, BlockStore};

pub struct MirrorStore {
    members: Vec<Arc<dyn BlockStore>>,
    block_size: usize,
}

impl MirrorStore {
    pub fn new(members: Vec<Arc<dyn BlockStore>>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::malformed("mirror", "no members"))?;
        let block_size = first.block_size();
        for member in &members {
            if member.block_size() != block_size {
                return Err(Error::BlockSize {
                    expected: block_size,
                    actual: member.block_size(),
                });
            }
        }
        Ok(MirrorStore {
            members,
            block_size,
        })
    }
}

impl BlockStore for MirrorStore {
    /// Replicates to all members in parallel; succeeds only when every
    /// member acknowledges, so a successful put means full replication.
    fn put(&self, block: &[u8]) -> Result<BlockName> {
        check_block_size(block, self.block_size)?;
        let name = crypto::hash_block(block);
        let results: Vec<Result<BlockName>> = std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .members
                .iter()
                .map(|member| scope.spawn(move || member.put(block)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("mirror put worker panicked"))
                .collect()
        });
        for result in results {
            if result? != name {
                return Err(Error::malformed("mirror", "member renamed a block"));
            }
        }
        Ok(name)
    }

    /// Queries all members concurrently and returns the first response
    /// that verifies; losing responses are discarded, not cancelled.
    fn get(&self, name: &BlockName) -> Result<Vec<u8>> {
        let (tx, rx) = mpsc::channel();
        for member in &self.members {
            let member = Arc::clone(member);
            let tx = tx.clone();
            let name = *name;
            std::thread::spawn(move || {
                let result = member
                    .get(&name)
                    .and_then(|bytes| verify_block(&name, &bytes).map(|_| bytes));
                // The receiver may be gone if another member already won.
                let _unused = tx.send(result);
            });
        }
        drop(tx);

        let mut failure: Option<Error> = None;
        for _ in 0..self.members.len() {
            match rx.recv() {
                Ok(Ok(bytes)) => return Ok(bytes),
                Ok(Err(e)) => {
                    // Remember the most telling error: anything beats
                    // not-found.
                    if failure.is_none() || !e.is_not_found() {
                        let replace = match &failure {
                            Some(old) => old.is_not_found(),
                            None => true,
                        };
                        if replace {
                            failure = Some(e);
                        }
                    }
                }
                Err(_) => break,
            }
        }
        Err(failure.unwrap_or(Error::NotFound(*name)))
    }

    fn block_size(&self) -> usize {
        self.block_size
    }

    /// A put only succeeds once every member holds the block, so the
    /// mirror is durable if any member is.
    fn is_persistent(&self) -> bool {
        self.members.iter().any(|m| m.is_persistent())
    }
}

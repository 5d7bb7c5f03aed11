//! Version control against a served store: a worktree attached to a
//! remote head.
//!
//! Worktree state is a plaintext `.uvc` file at the top of the tree:
//! the remote address, the base snapshot the worktree was last synced
//! to, and the staged snapshot waiting to be pushed. The file is never
//! ingested into the versioned tree.

use std::path::{Path, PathBuf};

use clap::Subcommand;
use upss::uvc::{ingest_tree_except, materialize, PushOutcome, UvcClient};
use upss::{BlockPointer, DirectoryObject, Padding};

use crate::commands::parse_pointer;
use crate::Failure;

const STATE_FILE: &str = ".uvc";

#[derive(Subcommand)]
pub enum UvcCommand {
    /// Attach an existing directory to a remote, starting from scratch.
    Init {
        /// Server address, e.g. 127.0.0.1:7450.
        remote: String,
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
    /// Fetch the remote head into a fresh directory.
    Clone { remote: String, dest: PathBuf },
    /// Snapshot the working tree, staging it for push.
    Add {
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
    /// Offer the staged snapshot as the new head.
    Push {
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
    /// Bring the working tree up to the remote head.
    Pull {
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
    /// List the head's ancestry, oldest first.
    Log {
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
    /// Print the remote head pointer.
    Head {
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
}

struct State {
    remote: String,
    base: Option<BlockPointer>,
    pending: Option<BlockPointer>,
}

impl State {
    fn path(dir: &Path) -> PathBuf {
        dir.join(STATE_FILE)
    }

    fn load(dir: &Path) -> Result<Self, Failure> {
        let path = Self::path(dir);
        let text = std::fs::read_to_string(&path).map_err(|_| {
            Failure::Usage(format!(
                "{} is not an attached worktree; run `upss uvc init` or `upss uvc clone`",
                dir.display()
            ))
        })?;
        let mut remote = None;
        let mut base = None;
        let mut pending = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Failure::Usage(format!("corrupt state file {}", path.display()));
            let (key, value) = line.split_once('=').ok_or_else(bad)?;
            match key.trim() {
                "remote" => remote = Some(value.trim().to_string()),
                "base" => base = Some(parse_pointer(value).ok_or_else(bad)?),
                "pending" => pending = Some(parse_pointer(value).ok_or_else(bad)?),
                _ => return Err(bad()),
            }
        }
        let remote = remote.ok_or_else(|| {
            Failure::Usage(format!("state file {} names no remote", path.display()))
        })?;
        Ok(State {
            remote,
            base,
            pending,
        })
    }

    fn save(&self, dir: &Path) -> Result<(), Failure> {
        let mut text = format!("remote={}\n", self.remote);
        if let Some(base) = &self.base {
            text.push_str(&format!("base={}\n", hex::encode(base.encode())));
        }
        if let Some(pending) = &self.pending {
            text.push_str(&format!("pending={}\n", hex::encode(pending.encode())));
        }
        std::fs::write(Self::path(dir), text)?;
        Ok(())
    }
}

/// Trees synced through version control seal with deterministic padding
/// throughout, so two writers staging the same content propose the same
/// snapshot name.
fn load_tree(client: &UvcClient, ptr: &BlockPointer) -> Result<DirectoryObject, Failure> {
    Ok(DirectoryObject::load_with_padding(
        client.remote_store(),
        ptr,
        Padding::Deterministic,
    )?)
}

pub fn run(command: UvcCommand) -> Result<(), Failure> {
    match command {
        UvcCommand::Init { remote, dir } => init(&remote, &dir),
        UvcCommand::Clone { remote, dest } => clone(&remote, &dest),
        UvcCommand::Add { dir } => add(&dir),
        UvcCommand::Push { dir } => push(&dir),
        UvcCommand::Pull { dir } => pull(&dir),
        UvcCommand::Log { dir } => log(&dir),
        UvcCommand::Head { dir } => head(&dir),
    }
}

fn init(remote: &str, dir: &Path) -> Result<(), Failure> {
    if !dir.is_dir() {
        return Err(Failure::Usage(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    if State::path(dir).exists() {
        return Err(Failure::Usage(format!(
            "{} is already attached",
            dir.display()
        )));
    }
    State {
        remote: remote.to_string(),
        base: None,
        pending: None,
    }
    .save(dir)?;
    println!("attached {} to {remote}", dir.display());
    Ok(())
}

fn clone(remote: &str, dest: &Path) -> Result<(), Failure> {
    let client = UvcClient::new(remote);
    let head = client
        .head()?
        .ok_or_else(|| Failure::Usage(format!("{remote} has no head to clone")))?;

    if dest.exists() {
        if !dest.is_dir() {
            return Err(Failure::Usage(format!(
                "{} exists and is not a directory",
                dest.display()
            )));
        }
        if std::fs::read_dir(dest)?.next().is_some() {
            return Err(Failure::Usage(format!(
                "{} is not empty",
                dest.display()
            )));
        }
    } else {
        std::fs::create_dir_all(dest)?;
    }

    let tree = load_tree(&client, &head)?;
    materialize(&tree, dest)?;
    State {
        remote: remote.to_string(),
        base: Some(head),
        pending: None,
    }
    .save(dest)?;
    println!("cloned {} into {}", head.name, dest.display());
    Ok(())
}

fn add(dir: &Path) -> Result<(), Failure> {
    let mut state = State::load(dir)?;
    let client = UvcClient::new(&state.remote);
    let tree = match &state.base {
        Some(base) => load_tree(&client, base)?,
        None => DirectoryObject::with_padding(client.remote_store(), Padding::Deterministic),
    };
    let report = ingest_tree_except(&tree, dir, &[STATE_FILE])?;
    for (name, why) in &report.skipped {
        eprintln!("skipping {name}: {why}");
    }
    let ptr = tree.persist()?;
    if state.base.as_ref().map(|b| b.name) == Some(ptr.name) {
        state.pending = None;
        state.save(dir)?;
        println!("nothing changed since the base snapshot");
        return Ok(());
    }
    state.pending = Some(ptr);
    state.save(dir)?;
    println!(
        "staged {}: {} added, {} updated, {} unchanged",
        ptr.name, report.added, report.updated, report.unchanged
    );
    Ok(())
}

fn push(dir: &Path) -> Result<(), Failure> {
    let mut state = State::load(dir)?;
    let Some(pending) = state.pending else {
        return Err(Failure::Usage(
            "nothing staged; run `upss uvc add` first".into(),
        ));
    };
    let client = UvcClient::new(&state.remote);
    let expected = state.base.as_ref().map(|p| &p.name);
    match client.push(&pending, expected)? {
        PushOutcome::Accepted => {
            state.base = Some(pending);
            state.pending = None;
            state.save(dir)?;
            println!("accepted; head is {}", pending.name);
            Ok(())
        }
        PushOutcome::Rejected { head, reason } => {
            // Adopt the winner as the new base so the recovery is just
            // `add` (restage onto it) and `push` again. The staged
            // snapshot is dropped; the worktree files still hold its
            // content.
            let note = match head {
                Some(winner) => {
                    state.base = Some(winner);
                    state.pending = None;
                    state.save(dir)?;
                    format!(
                        "push rejected ({reason}); head is {}; run `upss uvc add` to restage",
                        winner.name
                    )
                }
                None => format!("push rejected ({reason})"),
            };
            Err(Failure::Rejected(note))
        }
    }
}

fn pull(dir: &Path) -> Result<(), Failure> {
    let mut state = State::load(dir)?;
    let client = UvcClient::new(&state.remote);
    let Some(head) = client.head()? else {
        println!("remote has no head; nothing to pull");
        return Ok(());
    };
    if state.base.as_ref().map(|b| b.name) == Some(head.name) {
        println!("already at {}", head.name);
        return Ok(());
    }
    let tree = load_tree(&client, &head)?;
    materialize(&tree, dir)?;
    state.base = Some(head);
    state.pending = None;
    state.save(dir)?;
    println!("pulled {}", head.name);
    Ok(())
}

fn log(dir: &Path) -> Result<(), Failure> {
    let state = State::load(dir)?;
    let client = UvcClient::new(&state.remote);
    for (i, ptr) in client.log()?.iter().enumerate() {
        println!("{i}: {} {}", hex::encode(ptr.encode()), ptr.name);
    }
    Ok(())
}

fn head(dir: &Path) -> Result<(), Failure> {
    let state = State::load(dir)?;
    let client = UvcClient::new(&state.remote);
    match client.head()? {
        Some(ptr) => println!("{}", hex::encode(ptr.encode())),
        None => println!("empty"),
    }
    Ok(())
}

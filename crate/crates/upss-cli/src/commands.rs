//! The filesystem command set.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use upss::dag::HistoryEntry;
use upss::fs::Node;
use upss::net::{Server, StoreHandler};
use upss::uvc::UvcHandler;
use upss::{BlockPointer, DirectoryObject, Error, FileObject, ObjectKind};

use crate::config::Config;
use crate::workspace::{self, Workspace};
use crate::Failure;

/// Split a path into parent directory path and leaf name. Rejects the
/// bare root, which has no leaf.
fn split_leaf(path: &str) -> Result<(String, String), Failure> {
    let segments: Vec<&str> = path
        .split('/')
        .filter(|c| !c.is_empty() && *c != ".")
        .collect();
    if segments.iter().any(|c| *c == "..") {
        return Err(Failure::Lib(Error::InvalidName(path.to_string())));
    }
    match segments.split_last() {
        Some((leaf, parents)) => Ok((parents.join("/"), leaf.to_string())),
        None => Err(Failure::Usage("path names the root".into())),
    }
}

fn parent_dir(ws: &Workspace, parent: &str) -> Result<DirectoryObject, Failure> {
    match ws.root.lookup(parent)? {
        Node::Dir(d) => Ok(d),
        Node::File(_) => Err(Failure::Lib(Error::NotADirectory(parent.to_string()))),
    }
}

/// Parse an encoded pointer in its hex interchange form.
pub fn parse_pointer(text: &str) -> Option<BlockPointer> {
    let bytes = hex::decode(text.trim()).ok()?;
    BlockPointer::decode(&bytes).ok()
}

fn pointer_hex(ptr: &BlockPointer) -> String {
    hex::encode(ptr.encode())
}

pub fn init(cfg: &Config) -> Result<(), Failure> {
    let ptr = workspace::init(cfg)?;
    println!("initialized; root {}", pointer_hex(&ptr));
    Ok(())
}

pub fn ls(cfg: &Config, path: &str) -> Result<(), Failure> {
    let ws = workspace::open(cfg)?;
    match ws.root.lookup(path)? {
        Node::Dir(dir) => {
            for (name, kind) in dir.list() {
                match kind {
                    ObjectKind::Directory => println!("{name}/"),
                    ObjectKind::File => println!("{name}"),
                }
            }
        }
        Node::File(_) => println!("{}", path.trim_end_matches('/')),
    }
    Ok(())
}

pub fn info(cfg: &Config, path: &str) -> Result<(), Failure> {
    let ws = workspace::open(cfg)?;
    let node = ws.root.lookup(path)?;
    println!("path: {path}");
    match node {
        Node::File(file) => {
            let ptr = file.pointer().expect("loaded object has a pointer");
            let version = file.version().expect("loaded object has a version");
            let blinded = version
                .extents
                .iter()
                .filter(|e| !e.reference.is_readable())
                .count();
            println!("kind: file");
            println!("size: {} bytes", version.size);
            println!("pointer: {}", pointer_hex(&ptr));
            println!("name: {}", ptr.name);
            println!("blocks: {} extents, {} blinded", version.extents.len(), blinded);
            match version.prev {
                Some(prev) => println!("prev: {}", prev.name()),
                None => println!("prev: none"),
            }
        }
        Node::Dir(dir) => {
            let ptr = dir.pointer().expect("loaded object has a pointer");
            let version = dir.version().expect("loaded object has a version");
            println!("kind: directory");
            println!("entries: {}", dir.len());
            println!("pointer: {}", pointer_hex(&ptr));
            println!("name: {}", ptr.name);
            match version.prev {
                Some(prev) => println!("prev: {}", prev.name()),
                None => println!("prev: none"),
            }
        }
    }
    Ok(())
}

pub fn touch(cfg: &Config, path: &str) -> Result<(), Failure> {
    let ws = workspace::open(cfg)?;
    let (parent, leaf) = split_leaf(path)?;
    let dir = parent_dir(&ws, &parent)?;
    match dir.entry_kind(&leaf) {
        Ok(ObjectKind::File) => return Ok(()), // already there
        Ok(ObjectKind::Directory) => {
            return Err(Failure::Lib(Error::Exists(leaf)));
        }
        Err(Error::NoEntry(_)) => {
            dir.create_file(&leaf)?;
        }
        Err(e) => return Err(Failure::Lib(e)),
    }
    ws.commit()?;
    Ok(())
}

pub fn mkdir(cfg: &Config, path: &str) -> Result<(), Failure> {
    let ws = workspace::open(cfg)?;
    let (parent, leaf) = split_leaf(path)?;
    let dir = parent_dir(&ws, &parent)?;
    dir.mkdir(&leaf)?;
    ws.commit()?;
    Ok(())
}

pub fn append(
    cfg: &Config,
    path: &str,
    data: Option<String>,
    from: Option<PathBuf>,
) -> Result<(), Failure> {
    let bytes = match (data, from) {
        (Some(text), None) => text.into_bytes(),
        (None, Some(source)) => std::fs::read(source)?,
        (None, None) => {
            return Err(Failure::Usage(
                "append wants literal bytes or --from <file>".into(),
            ));
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let ws = workspace::open(cfg)?;
    let file = match ws.root.lookup(path)? {
        Node::File(f) => f,
        Node::Dir(_) => return Err(Failure::Lib(Error::NotAFile(path.to_string()))),
    };
    file.append(&bytes)?;
    ws.commit()?;
    Ok(())
}

pub fn store(cfg: &Config, source: &Path, path: &str) -> Result<(), Failure> {
    let bytes = std::fs::read(source)?;
    let ws = workspace::open(cfg)?;
    let (parent, leaf) = split_leaf(path)?;
    let dir = parent_dir(&ws, &parent)?;
    let file = match dir.entry_kind(&leaf) {
        Ok(ObjectKind::File) => {
            let f = dir.open_file(&leaf)?;
            f.truncate(0)?;
            f
        }
        Ok(ObjectKind::Directory) => {
            return Err(Failure::Lib(Error::NotAFile(path.to_string())));
        }
        Err(Error::NoEntry(_)) => dir.create_file(&leaf)?,
        Err(e) => return Err(Failure::Lib(e)),
    };
    file.write(0, &bytes)?;
    ws.commit()?;
    println!(
        "stored {} bytes at {path}; pointer {}",
        bytes.len(),
        pointer_hex(&file.pointer().expect("just persisted"))
    );
    Ok(())
}

pub fn history(cfg: &Config, path: &str, depth: Option<usize>) -> Result<(), Failure> {
    let ws = workspace::open(cfg)?;
    let hist = match ws.root.lookup(path)? {
        Node::File(f) => f.history(depth)?,
        Node::Dir(d) => d.history(depth)?,
    };
    for (i, entry) in hist.entries.iter().enumerate() {
        match entry {
            HistoryEntry::Version { pointer, version } => {
                println!("{i}: {} {} bytes", pointer.name, version.size);
            }
            HistoryEntry::Blind(name) => {
                println!("{i}: blinded {name}");
            }
        }
    }
    if hist.truncated {
        println!("... older versions not walked");
    }
    if let Some(name) = hist.broken {
        println!("chain broken: {name} is missing");
    }
    Ok(())
}

fn node_pointer(node: &Node) -> BlockPointer {
    match node {
        Node::File(f) => f.pointer(),
        Node::Dir(d) => d.pointer(),
    }
    .expect("loaded object has a pointer")
}

pub fn name(cfg: &Config, path: &str) -> Result<(), Failure> {
    let ws = workspace::open(cfg)?;
    let node = ws.root.lookup(path)?;
    println!("{}", pointer_hex(&node_pointer(&node)));
    Ok(())
}

pub fn names(cfg: &Config, path: &str) -> Result<(), Failure> {
    let ws = workspace::open(cfg)?;
    match ws.root.lookup(path)? {
        Node::Dir(dir) => {
            for (entry, kind) in dir.list() {
                let ptr = match kind {
                    ObjectKind::File => dir.open_file(&entry)?.pointer(),
                    ObjectKind::Directory => dir.open_dir(&entry)?.pointer(),
                }
                .expect("loaded child has a pointer");
                println!("{} {entry}", pointer_hex(&ptr));
            }
        }
        node @ Node::File(_) => {
            println!("{} {path}", pointer_hex(&node_pointer(&node)));
        }
    }
    Ok(())
}

pub fn get(cfg: &Config, target: &str) -> Result<(), Failure> {
    let ws = workspace::open(cfg)?;
    let bytes = if let Some(ptr) = parse_pointer(target) {
        FileObject::load(ws.store.clone(), &ptr)?.read_all()?
    } else {
        match ws.root.lookup(target)? {
            Node::File(f) => f.read_all()?,
            Node::Dir(_) => {
                return Err(Failure::Lib(Error::NotAFile(target.to_string())));
            }
        }
    };
    let mut out = std::io::stdout().lock();
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn get_path(cfg: &Config, pointer: &str) -> Result<(), Failure> {
    let Some(target) = parse_pointer(pointer) else {
        return Err(Failure::Usage("not a valid block pointer".into()));
    };
    let ws = workspace::open(cfg)?;

    if node_pointer(&Node::Dir(ws.root.clone())).name == target.name {
        println!("/");
        return Ok(());
    }

    // Breadth-first search, so the shortest path wins.
    let mut queue: Vec<(String, DirectoryObject)> = vec![(String::new(), ws.root.clone())];
    while !queue.is_empty() {
        let mut next = Vec::new();
        for (prefix, dir) in queue {
            for (entry, kind) in dir.list() {
                let path = format!("{prefix}/{entry}");
                match kind {
                    ObjectKind::File => {
                        let f = dir.open_file(&entry)?;
                        if f.pointer().expect("loaded child").name == target.name {
                            println!("{path}");
                            return Ok(());
                        }
                    }
                    ObjectKind::Directory => {
                        let d = dir.open_dir(&entry)?;
                        if d.pointer().expect("loaded child").name == target.name {
                            println!("{path}");
                            return Ok(());
                        }
                        next.push((path, d));
                    }
                }
            }
        }
        queue = next;
    }
    Err(Failure::Lib(Error::NoEntry(format!(
        "no object under the root has pointer {pointer}"
    ))))
}

pub fn serve(cfg: &Config, addr: &str, uvc_head: Option<PathBuf>) -> Result<(), Failure> {
    let store = cfg.open_store()?;
    let server = match uvc_head {
        Some(head) => {
            let handler = UvcHandler::open(store, Some(head))?;
            Server::start(Arc::new(handler), addr)?
        }
        None => Server::start(Arc::new(StoreHandler::new(store)), addr)?,
    };
    println!("listening on {}", server.local_addr());
    std::io::stdout().flush()?;
    loop {
        std::thread::park();
    }
}

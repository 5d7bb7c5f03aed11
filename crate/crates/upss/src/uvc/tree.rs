use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fs::{DirectoryObject, FileObject, Node};

/// What an ingest pass did.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AddReport {
    pub added: usize,
    pub updated: usize,
    pub unchanged: usize,
    /// Entries that could not be ingested, with the reason. They are
    /// skipped, not fatal.
    pub skipped: Vec<(String, String)>,
}

/// Ingest a host directory tree into `dir`. Unchanged files are left
/// alone so they produce no new blocks on persist; changed files are
/// rewritten in place, new ones created. Nothing is deleted.
pub fn ingest_tree(dir: &DirectoryObject, source: &Path) -> Result<AddReport> {
    ingest_tree_except(dir, source, &[])
}

/// As [`ingest_tree`], but leaving out top-level entries named in
/// `exclude`. Clients that keep their own state file inside the
/// worktree use this to keep it out of the versioned tree.
pub fn ingest_tree_except(
    dir: &DirectoryObject,
    source: &Path,
    exclude: &[&str],
) -> Result<AddReport> {
    let mut report = AddReport::default();
    ingest_dir(dir, source, exclude, &mut report)?;
    Ok(report)
}

fn ingest_dir(
    dir: &DirectoryObject,
    source: &Path,
    exclude: &[&str],
    report: &mut AddReport,
) -> Result<()> {
    let mut entries: Vec<fs::DirEntry> = fs::read_dir(source)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());

    for entry in entries {
        if exclude
            .iter()
            .any(|skip| entry.file_name().as_os_str() == *skip)
        {
            continue;
        }
        let path = entry.path();
        let Some(name) = entry.file_name().to_str().map(str::to_string) else {
            report
                .skipped
                .push((path.display().to_string(), "name is not UTF-8".into()));
            continue;
        };
        let file_type = match entry.file_type() {
            Ok(t) => t,
            Err(e) => {
                report.skipped.push((path.display().to_string(), e.to_string()));
                continue;
            }
        };
        if file_type.is_dir() {
            let sub = dir.ensure_dir(&name)?;
            // Exclusion is top-level only.
            ingest_dir(&sub, &path, &[], report)?;
        } else if file_type.is_file() {
            match fs::read(&path) {
                Ok(bytes) => ingest_file(dir, &name, &bytes, report)?,
                Err(e) => {
                    report.skipped.push((path.display().to_string(), e.to_string()));
                }
            }
        } else {
            report
                .skipped
                .push((path.display().to_string(), "not a regular file".into()));
        }
    }
    Ok(())
}

fn ingest_file(
    dir: &DirectoryObject,
    name: &str,
    bytes: &[u8],
    report: &mut AddReport,
) -> Result<()> {
    if dir.contains(name) {
        let file = match dir.open_file(name) {
            Ok(f) => f,
            Err(Error::NotAFile(_)) => {
                // A directory is being replaced by a file.
                dir.remove(name)?;
                let file = dir.create_file(name)?;
                file.write(0, bytes)?;
                report.updated += 1;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        if file.size() == bytes.len() as u64 && file.read_all()? == bytes {
            report.unchanged += 1;
        } else {
            file.truncate(0)?;
            file.write(0, bytes)?;
            report.updated += 1;
        }
    } else {
        let file = dir.create_file(name)?;
        file.write(0, bytes)?;
        report.added += 1;
    }
    Ok(())
}

/// Write the tree under `dir` out as plaintext files below `dest`,
/// creating directories as needed and overwriting existing files.
pub fn materialize(dir: &DirectoryObject, dest: &Path) -> Result<()> {
    fs::create_dir_all(dest)?;
    for (name, _) in dir.list() {
        match dir.lookup(&name)? {
            Node::Dir(sub) => materialize(&sub, &dest.join(&name))?,
            Node::File(file) => {
                write_file(&file, &dest.join(&name))?;
            }
        }
    }
    Ok(())
}

fn write_file(file: &FileObject, dest: &Path) -> Result<()> {
    let bytes = file.read_all()?;
    fs::write(dest, bytes)?;
    Ok(())
}

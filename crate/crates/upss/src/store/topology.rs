//! Textual store topology descriptions.
//!
//! The CLI and benchmark harness compose stores from a one-line spec:
//!
//! ```text
//! memory
//! file:/var/blocks
//! net:127.0.0.1:7450
//! cache(memory, file:/var/blocks, journal=/var/journal)
//! cache(memory, net:10.0.0.2:7450, journal=/var/journal, nosync)
//! mirror[file:/a; net:10.0.0.2:7450]
//! latency(memory, 10ms)
//! ```
//!
//! `latency` wraps a store with a fixed per-op delay and exists for
//! benchmarking slow backends reproducibly.

use std::sync::Arc;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::net::RemoteStore;
use crate::store::testing::LatencyStore;
use crate::store::{BlockStore, CacheConfig, CachingStore, FileStore, MemoryStore, MirrorStore};

pub fn parse_topology(spec: &str) -> Result<Arc<dyn BlockStore>> {
    let spec = spec.trim();
    if spec == "memory" {
        return Ok(Arc::new(MemoryStore::new()));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return Ok(Arc::new(FileStore::open(path.trim())?));
    }
    if let Some(addr) = spec.strip_prefix("net:") {
        return Ok(Arc::new(RemoteStore::new(addr.trim())));
    }
    if let Some(inner) = enclosed(spec, "cache(", ")") {
        return parse_cache(inner);
    }
    if let Some(inner) = enclosed(spec, "mirror[", "]") {
        let members = split_top_level(inner, ';')
            .into_iter()
            .map(parse_topology)
            .collect::<Result<Vec<_>>>()?;
        return Ok(Arc::new(MirrorStore::new(members)?));
    }
    if let Some(inner) = enclosed(spec, "latency(", ")") {
        let parts = split_top_level(inner, ',');
        if parts.len() != 2 {
            return Err(Error::malformed("store topology", "latency wants (store, millis)"));
        }
        let store = parse_topology(parts[0])?;
        let millis: u64 = parts[1]
            .trim()
            .trim_end_matches("ms")
            .parse()
            .map_err(|_| Error::malformed("store topology", format!("bad delay {:?}", parts[1])))?;
        return Ok(Arc::new(LatencyStore::new(
            store,
            Duration::from_millis(millis),
        )));
    }
    Err(Error::malformed(
        "store topology",
        format!("unrecognized spec {spec:?}"),
    ))
}

fn parse_cache(inner: &str) -> Result<Arc<dyn BlockStore>> {
    let parts = split_top_level(inner, ',');
    if parts.len() < 3 {
        return Err(Error::malformed(
            "store topology",
            "cache wants (near, far, journal=path)",
        ));
    }
    let near = parse_topology(parts[0])?;
    let far = parse_topology(parts[1])?;
    let mut journal = None;
    let mut config = CacheConfig::default();
    for option in &parts[2..] {
        let option = option.trim();
        if let Some(path) = option.strip_prefix("journal=") {
            journal = Some(path.trim().to_string());
        } else if option == "nosync" {
            config.journal_sync = false;
        } else if let Some(n) = option.strip_prefix("batch=") {
            config.drain_batch = n.trim().parse().map_err(|_| {
                Error::malformed("store topology", format!("bad batch size {n:?}"))
            })?;
        } else {
            return Err(Error::malformed(
                "store topology",
                format!("unknown cache option {option:?}"),
            ));
        }
    }
    let journal = journal
        .ok_or_else(|| Error::malformed("store topology", "cache needs journal=path"))?;
    Ok(Arc::new(CachingStore::new(near, far, journal, config)?))
}

fn enclosed<'a>(spec: &'a str, prefix: &str, suffix: &str) -> Option<&'a str> {
    spec.strip_prefix(prefix)?.strip_suffix(suffix)
}

/// Split on `sep` at bracket depth zero.
fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            c if c == sep && depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts
}

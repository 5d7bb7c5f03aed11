//! The acceptance gate: one test per claimed system property, each
//! printing a single PASS or FAIL line (run with --nocapture to see
//! them). Every check here re-derives its expectations independently
//! of the library's own unit tests.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use upss::crypto::{self, hash_block};
use upss::dag;
use upss::fs::diff::Hunk;
use upss::net::testing::ByzantineHandler;
use upss::net::{RemoteStore, Server};
use upss::store::testing::LatencyStore;
use upss::store::{CacheConfig, CachingStore, MemoryStore};
use upss::fs::Node;
use upss::uvc::{ingest_tree, materialize, PushOutcome, UvcClient, UvcHandler};
use upss::{BlockName, BlockStore, DirectoryObject, Error, FileObject, Padding};

use upss_bench::{run, storage_report, BenchSpec, Workload};

const BS: u64 = 4096;

fn check(n: u32, what: &str, body: impl FnOnce() -> Result<String, String>) {
    match body() {
        Ok(detail) => println!("acceptance {n} [{what}]: PASS ({detail})"),
        Err(why) => {
            println!("acceptance {n} [{what}]: FAIL ({why})");
            panic!("acceptance {n} [{what}]: {why}");
        }
    }
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn names_of(store: &MemoryStore) -> HashSet<BlockName> {
    store.names().into_iter().collect()
}

#[test]
fn c1_duplicate_content_creates_no_new_data_blocks() {
    check(1, "dedup", || {
        let store = Arc::new(MemoryStore::new());
        let root = DirectoryObject::create(store.clone());
        let mut content = vec![0u8; 1 << 20];
        StdRng::seed_from_u64(0x0101).fill(&mut content[..]);

        let first = root.create_file("a").map_err(s)?;
        first.write(0, &content).map_err(s)?;
        root.persist().map_err(s)?;
        let before = names_of(&store);

        let started = Instant::now();
        let second = root.create_file("b").map_err(s)?;
        second.write(0, &content).map_err(s)?;
        root.persist().map_err(s)?;
        let elapsed = started.elapsed();

        let new: HashSet<_> = names_of(&store).difference(&before).copied().collect();
        let version = second.version().expect("persisted");
        for extent in &version.extents {
            if !before.contains(&extent.reference.name()) {
                return Err(format!(
                    "data block {} is new to the store",
                    extent.reference.name()
                ));
            }
        }
        if new.len() > 3 {
            return Err(format!("{} new meta blocks, want <= 3", new.len()));
        }
        if elapsed >= Duration::from_secs(5) {
            return Err(format!("took {elapsed:?}, want < 5s"));
        }
        Ok(format!(
            "0 new data blocks, {} new meta blocks, {elapsed:?}",
            new.len()
        ))
    });
}

#[test]
fn c2_guess_resistance_exponent_and_pointer_payload() {
    check(2, "pointer arithmetic", || {
        let exponent = crypto::expected_guesses(40, 3984);
        if exponent != 32_191 {
            return Err(format!("expected_guesses(40, 3984) = {exponent}, want 32191"));
        }

        let (_, ptr) = crypto::seal(b"x", Padding::Deterministic, 4096).map_err(s)?;
        let encoded = ptr.encode();
        // 5 header bytes tag the layout version, hash and cipher; the
        // payload is the 64-byte name plus the 16-byte key.
        let payload = encoded.len() - 5;
        if payload != 80 {
            return Err(format!("pointer payload {payload} bytes, want 80"));
        }
        Ok(format!("exponent 32191, payload {payload} bytes"))
    });
}

#[test]
fn c3_thousand_files_match_a_byte_oracle() {
    check(3, "round-trip oracle", || {
        let store = Arc::new(MemoryStore::new());
        let mut rng = StdRng::seed_from_u64(0x0303);
        let caps = [4096usize, 128 * 1024, 1 << 20];
        let mut buf = vec![0u8; 64 * 1024];
        let started = Instant::now();

        for i in 0..1000 {
            let cap = caps[rng.random_range(0..caps.len())];
            let file = FileObject::create(store.clone());
            let mut oracle: Vec<u8> = Vec::new();

            for _ in 0..rng.random_range(3..=8) {
                match rng.random_range(0..4u8) {
                    0 | 1 => {
                        let len = rng.random_range(0..=buf.len().min(cap));
                        let offset = rng.random_range(0..=cap - len);
                        rng.fill(&mut buf[..len]);
                        file.write(offset as u64, &buf[..len]).map_err(s)?;
                        if offset + len > oracle.len() {
                            oracle.resize(offset + len, 0);
                        }
                        oracle[offset..offset + len].copy_from_slice(&buf[..len]);
                    }
                    2 => {
                        let len = rng.random_range(0..=buf.len().min(cap - oracle.len().min(cap)));
                        rng.fill(&mut buf[..len]);
                        file.append(&buf[..len]).map_err(s)?;
                        oracle.extend_from_slice(&buf[..len]);
                    }
                    _ => {
                        let to = rng.random_range(0..=oracle.len());
                        file.truncate(to as u64).map_err(s)?;
                        oracle.truncate(to);
                    }
                }
            }

            let ptr = file.persist().map_err(s)?;
            let loaded = FileObject::load(store.clone(), &ptr).map_err(s)?;
            if loaded.size() != oracle.len() as u64 {
                return Err(format!(
                    "file {i}: size {} want {}",
                    loaded.size(),
                    oracle.len()
                ));
            }
            if loaded.read_all().map_err(s)? != oracle {
                return Err(format!("file {i}: content diverged from the oracle"));
            }
        }

        let elapsed = started.elapsed();
        if elapsed >= Duration::from_secs(60) {
            return Err(format!("took {elapsed:?}, want < 60s"));
        }
        Ok(format!("1000 files, {elapsed:?}"))
    });
}

#[test]
fn c4_single_byte_mutation_rewrites_one_data_block() {
    check(4, "copy-on-write", || {
        let store = Arc::new(MemoryStore::new());
        let root = DirectoryObject::create(store.clone());
        let file = root.create_file("f").map_err(s)?;

        let mut content = vec![0u8; 100 * BS as usize];
        StdRng::seed_from_u64(0x0404).fill(&mut content[..]);
        file.write(0, &content).map_err(s)?;
        let root_v1 = root.persist().map_err(s)?;
        let file_v1 = file.pointer().expect("persisted");
        let extents_v1 = file.version().expect("persisted").extents;
        let before = names_of(&store);

        // One byte, in a block whose extent sits in the head manifest.
        let at = 10 * BS + 17;
        let flipped = content[at as usize] ^ 0xff;
        file.write(at, &[flipped]).map_err(s)?;
        root.persist().map_err(s)?;

        let new: HashSet<_> = names_of(&store).difference(&before).copied().collect();
        let extents_v2 = file.version().expect("persisted").extents;
        if extents_v1.len() != extents_v2.len() {
            return Err("extent count changed".into());
        }
        let changed: Vec<usize> = (0..extents_v1.len())
            .filter(|&k| extents_v1[k].reference.name() != extents_v2[k].reference.name())
            .collect();
        if changed != vec![10] {
            return Err(format!("changed extents {changed:?}, want [10]"));
        }
        let data_new: Vec<_> = extents_v2
            .iter()
            .filter(|e| new.contains(&e.reference.name()))
            .collect();
        if data_new.len() != 1 {
            return Err(format!("{} new data blocks, want exactly 1", data_new.len()));
        }
        // 1 data block plus at most (depth + 2) meta for a file one
        // level under the root.
        if new.len() > 4 {
            return Err(format!("{} new blocks total, want <= 4", new.len()));
        }

        // Old pointers still resolve to the original bytes.
        let old_file = FileObject::load(store.clone(), &file_v1).map_err(s)?;
        if old_file.read_all().map_err(s)? != content {
            return Err("pre-mutation file pointer no longer serves original bytes".into());
        }
        let old_root = DirectoryObject::load(store.clone(), &root_v1).map_err(s)?;
        match old_root.lookup("f").map_err(s)? {
            Node::File(f) => {
                if f.read_all().map_err(s)? != content {
                    return Err("old root resolves to mutated content".into());
                }
            }
            Node::Dir(_) => return Err("old root lookup returned a directory".into()),
        }

        Ok(format!(
            "1 new data block, {} meta blocks, old snapshots intact",
            new.len() - 1
        ))
    });
}

#[test]
fn c5_cache_absorbs_a_slow_far_store() {
    check(5, "caching", || {
        let mut rng = StdRng::seed_from_u64(0x0505);
        let mut blocks = Vec::with_capacity(5000);
        for _ in 0..5000 {
            let mut b = vec![0u8; BS as usize];
            rng.fill(&mut b[..]);
            blocks.push(b);
        }
        let expected: Vec<BlockName> = blocks.iter().map(|b| hash_block(b)).collect();

        // Direct far-store baseline, sampled and extrapolated: 5,000
        // puts at 10 ms each would take close to a minute.
        let sample = 200;
        let direct = LatencyStore::new(
            Arc::new(MemoryStore::new()),
            Duration::from_millis(10),
        );
        let started = Instant::now();
        for b in &blocks[..sample] {
            direct.put(b).map_err(s)?;
        }
        let direct_estimate = started.elapsed() * (5000 / sample) as u32;

        // The same workload through a write-back cache.
        let dir = tempfile::tempdir().map_err(s)?;
        let near = Arc::new(MemoryStore::new());
        let far_inner = Arc::new(MemoryStore::new());
        let far = Arc::new(LatencyStore::new(
            far_inner.clone(),
            Duration::from_millis(10),
        ));
        let cache = CachingStore::new(
            near.clone(),
            far,
            dir.path().join("journal"),
            CacheConfig {
                drain_batch: 64,
                auto_drain: true,
                journal_sync: false,
            },
        )
        .map_err(s)?;

        let started = Instant::now();
        for b in &blocks {
            cache.put(b).map_err(s)?;
        }
        let cached = started.elapsed();
        if cached * 10 > direct_estimate {
            return Err(format!(
                "cached {cached:?} not 10x faster than direct {direct_estimate:?} (estimated)"
            ));
        }

        // Drain everything to the far side, wipe the near side, and
        // read every block back.
        cache.flush().map_err(s)?;
        near.clear();
        let failures = std::sync::atomic::AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for chunk in expected.chunks(expected.len() / 16 + 1) {
                let cache = &cache;
                let failures = &failures;
                scope.spawn(move || {
                    for name in chunk {
                        match cache.get(name) {
                            Ok(bytes) if hash_block(&bytes) == *name => {}
                            _ => {
                                failures.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                            }
                        }
                    }
                });
            }
        });
        let lost = failures.load(std::sync::atomic::Ordering::Relaxed);
        if lost != 0 {
            return Err(format!("{lost} blocks unreadable after drain + near clear"));
        }

        // Crash variant: the process dies after journal appends, before
        // any drain. A reopened cache must recover every block.
        let crash_far = Arc::new(MemoryStore::new());
        let crash_journal = dir.path().join("crash-journal");
        {
            let cache = CachingStore::new(
                Arc::new(MemoryStore::new()),
                crash_far.clone(),
                &crash_journal,
                CacheConfig {
                    drain_batch: 64,
                    auto_drain: false,
                    journal_sync: true,
                },
            )
            .map_err(s)?;
            for b in &blocks[..300] {
                cache.put(b).map_err(s)?;
            }
            // Dropped with everything still pending.
        }
        let recovered = CachingStore::new(
            Arc::new(MemoryStore::new()),
            crash_far.clone(),
            &crash_journal,
            CacheConfig {
                drain_batch: 64,
                auto_drain: false,
                journal_sync: true,
            },
        )
        .map_err(s)?;
        if recovered.pending() != 300 {
            return Err(format!(
                "journal recovered {} pending blocks, want 300",
                recovered.pending()
            ));
        }
        recovered.flush().map_err(s)?;
        for name in &expected[..300] {
            let bytes = crash_far.get(name).map_err(s)?;
            if hash_block(&bytes) != *name {
                return Err(format!("block {name} corrupted through crash recovery"));
            }
        }

        Ok(format!(
            "cached {cached:?} vs direct {direct_estimate:?} estimated, 0 lost after crash"
        ))
    });
}

#[test]
fn c6_redaction_diff_reproduces_the_published_hunks() {
    check(6, "redaction", || {
        let store = Arc::new(MemoryStore::new());
        let file = FileObject::create(store.clone());
        let mut content = vec![0u8; 4 * BS as usize];
        StdRng::seed_from_u64(0x0606).fill(&mut content[..]);
        file.write(0, &content).map_err(s)?;
        file.persist().map_err(s)?;
        let end = file.size();

        let redacted = file.redact(4096, 8191).map_err(s)?;
        redacted.write(end - 16, b"the edited bytes").map_err(s)?;
        redacted.write(end, b"added bytes").map_err(s)?;
        redacted.persist().map_err(s)?;

        let hunks = file.diff(&redacted).map_err(s)?;
        if hunks.len() != 3 {
            return Err(format!("{} hunks, want 3: {hunks:?}", hunks.len()));
        }
        if hunks[0]
            != (Hunk::Redacted {
                offset: 4096,
                orig_len: 4096,
                new_len: 4096,
            })
        {
            return Err(format!("hunk 0 is {:?}, want the blinded block", hunks[0]));
        }
        match &hunks[1] {
            Hunk::Replace { offset, orig, new }
                if *offset == 16368 && orig.len() == 16 && new == b"the edited bytes" => {}
            other => return Err(format!("hunk 1 is {other:?}, want 16-byte replace at 16368")),
        }
        match &hunks[2] {
            Hunk::Add { offset, bytes } if *offset == 16384 && bytes == b"added bytes" => {}
            other => return Err(format!("hunk 2 is {other:?}, want 11-byte add at 16384")),
        }

        match redacted.read(5000, 100) {
            Err(Error::Redacted) => {}
            other => {
                let outcome = match other {
                    Ok(_) => "readable".to_string(),
                    Err(e) => format!("{e}"),
                };
                return Err(format!("redacted range read: {outcome}, want redaction error"));
            }
        }

        let reference = upss::BlockReference::Full(redacted.pointer().expect("persisted"));
        let report = dag::verify(&reference, store.as_ref(), None).map_err(s)?;
        if !report.all_ok() {
            return Err(format!("verify found {} problems", report.problems.len()));
        }
        Ok(format!(
            "3 hunks exact, redacted reads refused, verify checked {} blocks",
            report.checked
        ))
    });
}

#[test]
fn c7_concurrent_pushes_serialize_and_clones_converge() {
    check(7, "version control", || {
        let tmp = tempfile::tempdir().map_err(s)?;
        let store = Arc::new(MemoryStore::new());
        let handler = UvcHandler::open(store, Some(tmp.path().join("head"))).map_err(s)?;
        let server = Server::start(Arc::new(handler), "127.0.0.1:0").map_err(s)?;
        let addr = server.local_addr().to_string();
        let started = Instant::now();

        let edit_a = |tree: &DirectoryObject| -> upss::Result<()> {
            tree.open_file("shared")?.write(0, b"edited by a")?;
            Ok(())
        };
        let edit_b = |tree: &DirectoryObject| -> upss::Result<()> {
            tree.create_file("extra")?.write(0, b"written by b")?;
            Ok(())
        };

        // First snapshot.
        let client = UvcClient::new(&addr);
        let tree = DirectoryObject::with_padding(client.remote_store(), Padding::Deterministic);
        tree.create_file("shared")
            .and_then(|f| f.write(0, b"base"))
            .map_err(s)?;
        let v1 = tree.persist().map_err(s)?;
        match client.push(&v1, None).map_err(s)? {
            PushOutcome::Accepted => {}
            PushOutcome::Rejected { reason, .. } => {
                return Err(format!("first push rejected: {reason}"));
            }
        }

        // Two writers build divergent children of v1 and push at once.
        let build = |edit: &dyn Fn(&DirectoryObject) -> upss::Result<()>| {
            let c = UvcClient::new(&addr);
            let t = DirectoryObject::load_with_padding(
                c.remote_store(),
                &v1,
                Padding::Deterministic,
            )?;
            edit(&t)?;
            t.persist()
        };
        let v2a = build(&edit_a).map_err(s)?;
        let v2b = build(&edit_b).map_err(s)?;

        let push = |ptr: upss::BlockPointer| {
            let c = UvcClient::new(&addr);
            c.push(&ptr, Some(&v1.name))
        };
        let (ra, rb) = std::thread::scope(|scope| {
            let ha = scope.spawn(|| push(v2a));
            let hb = scope.spawn(|| push(v2b));
            (ha.join().unwrap(), hb.join().unwrap())
        });
        let (ra, rb) = (ra.map_err(s)?, rb.map_err(s)?);

        let a_won = matches!(ra, PushOutcome::Accepted);
        let b_won = matches!(rb, PushOutcome::Accepted);
        if a_won == b_won {
            return Err(format!("want exactly one accepted push, got a={ra:?} b={rb:?}"));
        }
        let winner = if a_won { v2a } else { v2b };
        let reject = if a_won { rb } else { ra };
        match reject {
            PushOutcome::Rejected {
                head: Some(head), ..
            } if head.name == winner.name => {}
            other => return Err(format!("reject carried {other:?}, want the winning head")),
        }

        // The loser rebases onto the winner and succeeds.
        let rebase_client = UvcClient::new(&addr);
        let rebased = DirectoryObject::load_with_padding(
            rebase_client.remote_store(),
            &winner,
            Padding::Deterministic,
        )
        .map_err(s)?;
        if a_won {
            edit_b(&rebased).map_err(s)?;
        } else {
            edit_a(&rebased).map_err(s)?;
        }
        let v3 = rebased.persist().map_err(s)?;
        match rebase_client.push(&v3, Some(&winner.name)).map_err(s)? {
            PushOutcome::Accepted => {}
            PushOutcome::Rejected { reason, .. } => {
                return Err(format!("rebased push rejected: {reason}"));
            }
        }

        // A clone of the head, materialized and re-ingested, persists
        // to the identical root name.
        let clone_client = UvcClient::new(&addr);
        let head = clone_client
            .head()
            .map_err(s)?
            .ok_or("no head after three pushes")?;
        if head.name != v3.name {
            return Err("head is not the rebased snapshot".into());
        }
        let clone = DirectoryObject::load_with_padding(
            clone_client.remote_store(),
            &head,
            Padding::Deterministic,
        )
        .map_err(s)?;
        let dest = tmp.path().join("clone");
        std::fs::create_dir(&dest).map_err(s)?;
        materialize(&clone, &dest).map_err(s)?;
        let report = ingest_tree(&clone, &dest).map_err(s)?;
        if report.added != 0 || report.updated != 0 {
            return Err(format!(
                "re-ingest of a clone changed the tree: {report:?}"
            ));
        }
        let re = clone.persist().map_err(s)?;
        if re.name != head.name {
            return Err("clone re-persisted to a different root name".into());
        }

        let elapsed = started.elapsed();
        if elapsed >= Duration::from_secs(10) {
            return Err(format!("took {elapsed:?}, want < 10s"));
        }
        Ok(format!(
            "one push accepted, reject carried head, rebase landed, clone converged, {elapsed:?}"
        ))
    });
}

#[test]
fn c8_substituted_blocks_are_always_detected() {
    check(8, "byzantine store", || {
        let honest = Arc::new(MemoryStore::new());
        let server =
            Server::start(Arc::new(ByzantineHandler::new(honest)), "127.0.0.1:0").map_err(s)?;
        let client = RemoteStore::new(server.local_addr().to_string());

        let mut rng = StdRng::seed_from_u64(0x0808);
        let mut detected = 0;
        for _ in 0..100 {
            let mut block = vec![0u8; BS as usize];
            rng.fill(&mut block[..]);
            let name = client.put(&block).map_err(s)?;
            match client.get(&name) {
                Err(Error::Integrity { expected, .. }) if expected == name => detected += 1,
                Err(other) => return Err(format!("wrong error class: {other}")),
                Ok(_) => return Err("substituted block accepted".into()),
            }
        }
        if detected != 100 {
            return Err(format!("{detected}/100 substitutions detected"));
        }
        Ok("100/100 substitutions detected".into())
    });
}

#[test]
fn c9_harness_sustains_100k_ops_and_bounded_overhead() {
    check(9, "benchmark substitute", || {
        let mut summary = Vec::new();
        for workload in [
            Workload::MakeDir,
            Workload::MakeFile,
            Workload::ReadFile,
            Workload::WriteFile,
        ] {
            let spec = BenchSpec::new(workload, 100_000);
            let report = run(&spec)?;
            if report.total_ops != 100_000 {
                return Err(format!("{workload}: {} ops recorded", report.total_ops));
            }
            let last = report.samples.last().ok_or("empty series")?;
            if last.completed_ops != 100_000 {
                return Err(format!(
                    "{workload}: series ends at {} ops",
                    last.completed_ops
                ));
            }
            let mut prev = (0u64, 0u64);
            for sample in &report.samples {
                if sample.elapsed_ms < prev.0 || sample.completed_ops <= prev.1 {
                    return Err(format!("{workload}: series is not monotone"));
                }
                prev = (sample.elapsed_ms, sample.completed_ops);
            }
            summary.push(format!("{workload} {:.0} ops/s", report.ops_per_sec()));
        }

        // Storage accounting for 1 MiB of full-block content, against
        // the frozen regression bound.
        let store = Arc::new(MemoryStore::new());
        let file = FileObject::create(store.clone());
        let mut content = vec![0u8; 1 << 20];
        StdRng::seed_from_u64(0x0909).fill(&mut content[..]);
        file.write(0, &content).map_err(s)?;
        file.persist().map_err(s)?;
        let report = storage_report(store.as_ref(), 1 << 20)?;
        if report.s_t < report.s {
            return Err(format!("s_t {} below content size {}", report.s_t, report.s));
        }
        if report.s_t > 2 * report.s {
            return Err(format!(
                "s_t {} exceeds the 2x regression bound on {}",
                report.s_t, report.s
            ));
        }
        summary.push(format!(
            "storage ratio {:.3} within the 2x bound",
            report.ratio
        ));
        Ok(summary.join(", "))
    });
}

//! Benchmark harness for the storage stack.
//!
//! Four microbenchmark workloads (directory creation, file creation,
//! random reads, random writes) plus a mixed macro workload, all driven
//! by a seeded generator so a run is reproducible op for op. Results
//! come back as a cumulative time series suitable for plotting, plus
//! latency percentiles.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use upss::store::{parse_topology, FileStore, MemoryStore};
use upss::{BlockStore, DirectoryObject, FileObject};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Workload {
    /// Create empty directories under one root.
    MakeDir,
    /// Create empty files under one root.
    MakeFile,
    /// Sequentially read a randomly chosen population file.
    ReadFile,
    /// Overwrite a randomly chosen population file with fresh bytes.
    WriteFile,
    /// Ten consecutive I/O operations on a randomly chosen file,
    /// alternating read and write (five of each) at `io_size`. Counts
    /// as one op in the series; reads clamp to the file's current size.
    Macro { io_size: usize },
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Workload::MakeDir => write!(f, "makedir"),
            Workload::MakeFile => write!(f, "makefile"),
            Workload::ReadFile => write!(f, "readfile"),
            Workload::WriteFile => write!(f, "writefile"),
            Workload::Macro { io_size } => write!(f, "macro:{io_size}"),
        }
    }
}

impl std::str::FromStr for Workload {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "makedir" => Ok(Workload::MakeDir),
            "makefile" => Ok(Workload::MakeFile),
            "readfile" => Ok(Workload::ReadFile),
            "writefile" => Ok(Workload::WriteFile),
            other => {
                if let Some(size) = other.strip_prefix("macro:") {
                    let io_size = size
                        .parse()
                        .map_err(|_| format!("bad macro io size: {size}"))?;
                    return Ok(Workload::Macro { io_size });
                }
                Err(format!(
                    "unknown workload {other}; want makedir|makefile|readfile|writefile|macro:<bytes>"
                ))
            }
        }
    }
}

/// When to persist the root during write-heavy runs: after this much
/// wall time or this many writes, whichever comes first.
#[derive(Clone, Copy, Debug)]
pub struct SyncPolicy {
    pub interval: Duration,
    pub write_threshold: usize,
}

impl Default for SyncPolicy {
    fn default() -> Self {
        SyncPolicy {
            interval: Duration::from_secs(5),
            write_threshold: 15_000,
        }
    }
}

/// The file set that read and write workloads operate over.
#[derive(Clone, Copy, Debug)]
pub struct Population {
    pub files: usize,
    pub file_size: usize,
}

impl Default for Population {
    fn default() -> Self {
        Population {
            files: 1000,
            file_size: 4096,
        }
    }
}

pub struct BenchSpec {
    pub workload: Workload,
    pub ops: u64,
    pub topology: String,
    pub seed: u64,
    /// None: never persist mid-run.
    pub sync: Option<SyncPolicy>,
    pub population: Population,
}

impl BenchSpec {
    pub fn new(workload: Workload, ops: u64) -> Self {
        BenchSpec {
            workload,
            ops,
            topology: "memory".into(),
            seed: 0,
            sync: Some(SyncPolicy::default()),
            population: Population::default(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Sample {
    pub elapsed_ms: u64,
    pub completed_ops: u64,
}

pub struct RunReport {
    pub workload: String,
    /// Cumulative progress, sampled periodically plus a final point.
    pub samples: Vec<Sample>,
    pub total_ops: u64,
    pub elapsed: Duration,
    /// Mid-run persists forced by the sync policy.
    pub syncs: u64,
    /// Plaintext bytes written into the tree, population included.
    pub content_bytes: u64,
    /// Per-op wall times, sorted ascending.
    latencies_us: Vec<u64>,
}

impl RunReport {
    pub fn ops_per_sec(&self) -> f64 {
        self.total_ops as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }

    /// p in [0, 100].
    pub fn percentile_us(&self, p: f64) -> u64 {
        if self.latencies_us.is_empty() {
            return 0;
        }
        let rank = (p / 100.0 * (self.latencies_us.len() - 1) as f64).round() as usize;
        self.latencies_us[rank.min(self.latencies_us.len() - 1)]
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("elapsed_ms,completed_ops\n");
        for s in &self.samples {
            out.push_str(&format!("{},{}\n", s.elapsed_ms, s.completed_ops));
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "workload = {}\nops = {}\nelapsed_ms = {}\nops_per_sec = {:.1}\n\
             p50_us = {}\np90_us = {}\np99_us = {}\nmax_us = {}\nsyncs = {}\ncontent_bytes = {}\n",
            self.workload,
            self.total_ops,
            self.elapsed.as_millis(),
            self.ops_per_sec(),
            self.percentile_us(50.0),
            self.percentile_us(90.0),
            self.percentile_us(99.0),
            self.latencies_us.last().copied().unwrap_or(0),
            self.syncs,
            self.content_bytes,
        )
    }
}

fn sample_stride(ops: u64) -> u64 {
    (ops / 200).max(1)
}

/// The timing loop itself, separated from any store work so its own
/// cost can be measured against a no-op action.
fn drive(
    label: &str,
    ops: u64,
    mut op: impl FnMut(u64) -> upss::Result<()>,
) -> Result<RunReport, String> {
    let stride = sample_stride(ops);
    let mut samples = Vec::with_capacity((ops / stride + 1) as usize);
    let mut latencies_us = Vec::with_capacity(ops as usize);
    let started = Instant::now();
    for i in 0..ops {
        let begun = Instant::now();
        op(i).map_err(|e| format!("{label}: op {i} failed: {e}"))?;
        latencies_us.push(begun.elapsed().as_micros() as u64);
        let done = i + 1;
        if done % stride == 0 || done == ops {
            samples.push(Sample {
                elapsed_ms: started.elapsed().as_millis() as u64,
                completed_ops: done,
            });
        }
    }
    let elapsed = started.elapsed();
    latencies_us.sort_unstable();
    Ok(RunReport {
        workload: label.to_string(),
        samples,
        total_ops: ops,
        elapsed,
        syncs: 0,
        content_bytes: 0,
        latencies_us,
    })
}

/// Run a spec against the store its topology describes.
pub fn run(spec: &BenchSpec) -> Result<RunReport, String> {
    let store = parse_topology(&spec.topology).map_err(|e| format!("topology: {e}"))?;
    run_on(spec, store)
}

/// Run a spec against a store the caller built, for inspecting the
/// store afterwards.
pub fn run_on(spec: &BenchSpec, store: Arc<dyn BlockStore>) -> Result<RunReport, String> {
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let root = DirectoryObject::create(store);
    let mut content_bytes = 0u64;

    // Read/write workloads operate over a pre-built population; its
    // construction is not timed.
    let population: Vec<FileObject> = match spec.workload {
        Workload::ReadFile | Workload::WriteFile | Workload::Macro { .. } => {
            let mut files = Vec::with_capacity(spec.population.files);
            let mut data = vec![0u8; spec.population.file_size];
            for i in 0..spec.population.files {
                let file = root
                    .create_file(&format!("f{i}"))
                    .map_err(|e| format!("population: {e}"))?;
                rng.fill(&mut data[..]);
                file.write(0, &data).map_err(|e| format!("population: {e}"))?;
                content_bytes += data.len() as u64;
                files.push(file);
            }
            root.persist().map_err(|e| format!("population: {e}"))?;
            files
        }
        _ => Vec::new(),
    };

    let mut write_buf = vec![0u8; spec.population.file_size];
    let mut macro_buf = match spec.workload {
        Workload::Macro { io_size } => vec![0u8; io_size],
        _ => Vec::new(),
    };
    let mut writes_since_sync = 0usize;
    let mut last_sync = Instant::now();
    let mut syncs = 0u64;

    let label = spec.workload.to_string();
    let workload = spec.workload;
    let sync = spec.sync;

    let mut report = drive(&label, spec.ops, |i| {
        match workload {
            Workload::MakeDir => {
                root.mkdir(&format!("d{i}"))?;
            }
            Workload::MakeFile => {
                root.create_file(&format!("f{i}"))?;
            }
            Workload::ReadFile => {
                let file = &population[rng.random_range(0..population.len())];
                let len = file.size().min(spec.population.file_size as u64);
                file.read(0, len)?;
            }
            Workload::WriteFile => {
                let file = &population[rng.random_range(0..population.len())];
                rng.fill(&mut write_buf[..]);
                file.write(0, &write_buf)?;
                content_bytes += write_buf.len() as u64;
                writes_since_sync += 1;
            }
            Workload::Macro { io_size } => {
                let file = &population[rng.random_range(0..population.len())];
                for k in 0..10 {
                    if k % 2 == 0 {
                        let len = file.size().min(io_size as u64);
                        file.read(0, len)?;
                    } else {
                        rng.fill(&mut macro_buf[..]);
                        file.write(0, &macro_buf)?;
                        content_bytes += macro_buf.len() as u64;
                        writes_since_sync += 1;
                    }
                }
            }
        }
        if let Some(policy) = sync {
            if writes_since_sync >= policy.write_threshold
                || (writes_since_sync > 0 && last_sync.elapsed() >= policy.interval)
            {
                root.persist()?;
                writes_since_sync = 0;
                last_sync = Instant::now();
                syncs += 1;
            }
        }
        Ok(())
    })?;

    // Creation workloads persist their results once, after the timed
    // region.
    if root.is_dirty() {
        root.persist().map_err(|e| format!("final persist: {e}"))?;
    }

    report.syncs = syncs;
    report.content_bytes = content_bytes;
    Ok(report)
}

/// The harness loop around a no-op action: everything but the store.
pub fn run_null(ops: u64) -> RunReport {
    drive("null", ops, |i| {
        std::hint::black_box(i);
        Ok(())
    })
    .expect("no-op actions cannot fail")
}

/// A store whose total footprint can be measured.
pub trait StoreMetrics {
    fn stored_bytes(&self) -> Result<u64, String>;
}

impl StoreMetrics for MemoryStore {
    fn stored_bytes(&self) -> Result<u64, String> {
        Ok((self.len() * self.block_size()) as u64)
    }
}

impl StoreMetrics for FileStore {
    fn stored_bytes(&self) -> Result<u64, String> {
        FileStore::stored_bytes(self).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StorageReport {
    /// Content bytes ingested.
    pub s: u64,
    /// Bytes the store actually holds.
    pub s_t: u64,
    pub ratio: f64,
    /// Reference curve from an earlier fit of this design; reported for
    /// comparison, never asserted.
    pub predicted_s_t: f64,
}

/// The comparison curve: total store bytes as a function of content
/// bytes.
pub fn predicted_total(s: u64) -> f64 {
    (1.09 + 0.001613 * s as f64) * s as f64
}

pub fn storage_report(store: &dyn StoreMetrics, content_bytes: u64) -> Result<StorageReport, String> {
    let s_t = store.stored_bytes()?;
    Ok(StorageReport {
        s: content_bytes,
        s_t,
        ratio: if content_bytes == 0 {
            f64::NAN
        } else {
            s_t as f64 / content_bytes as f64
        },
        predicted_s_t: predicted_total(content_bytes),
    })
}

impl fmt::Display for StorageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "s = {}\ns_t = {}\nratio = {:.3}\npredicted_s_t = {:.0}\n",
            self.s, self.s_t, self.ratio, self.predicted_s_t
        )
    }
}

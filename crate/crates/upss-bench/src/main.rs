use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use upss::store::MemoryStore;
use upss_bench::{run, run_on, storage_report, BenchSpec, Population, SyncPolicy, Workload};

#[derive(Parser)]
#[command(name = "upss-bench", about = "Storage micro- and macrobenchmarks")]
struct Args {
    /// makedir | makefile | readfile | writefile | macro:<bytes>
    #[arg(long, default_value = "makefile")]
    workload: Workload,

    #[arg(long, default_value_t = 10_000)]
    ops: u64,

    /// Store topology, e.g. memory, file:/tmp/blocks,
    /// cache(memory, latency(memory, 10ms), journal=/tmp/j).
    #[arg(long, default_value = "memory")]
    topology: String,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Persist after this many seconds of writes. 0 disables the policy.
    #[arg(long, default_value_t = 5)]
    sync_secs: u64,

    /// Persist after this many writes.
    #[arg(long, default_value_t = 15_000)]
    sync_writes: usize,

    /// Population size for read/write workloads.
    #[arg(long, default_value_t = 1000)]
    files: usize,

    /// Population file size in bytes.
    #[arg(long, default_value_t = 4096)]
    file_size: usize,

    /// Write the time series to this file instead of stdout.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,

    /// Measure store bytes against content bytes after the run.
    /// Ignores the topology flag and runs on a plain memory store.
    #[arg(long)]
    storage: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = BenchSpec {
        workload: args.workload,
        ops: args.ops,
        topology: args.topology,
        seed: args.seed,
        sync: (args.sync_secs > 0).then_some(SyncPolicy {
            interval: Duration::from_secs(args.sync_secs),
            write_threshold: args.sync_writes,
        }),
        population: Population {
            files: args.files,
            file_size: args.file_size,
        },
    };

    let outcome = if args.storage {
        let store = Arc::new(MemoryStore::new());
        run_on(&spec, store.clone()).and_then(|report| {
            let storage = storage_report(store.as_ref(), report.content_bytes)?;
            Ok((report, Some(storage)))
        })
    } else {
        run(&spec).map(|report| (report, None))
    };

    let (report, storage) = match outcome {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("upss-bench: {e}");
            return ExitCode::FAILURE;
        }
    };

    print!("{}", report.summary());
    if let Some(storage) = storage {
        print!("{storage}");
    }
    match args.csv {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, report.csv()) {
                eprintln!("upss-bench: writing {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        }
        None => print!("{}", report.csv()),
    }
    ExitCode::SUCCESS
}

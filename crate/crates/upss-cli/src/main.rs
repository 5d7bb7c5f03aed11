//! upss: command-line access to a private storage tree.
//!
//! State lives in two places: an encrypted vault file holding the root
//! block pointer, and a block store described by a one-line topology.
//! Every mutating command persists the tree first and rewrites the
//! vault second, so a command killed at any point leaves the previous
//! root loadable.

mod commands;
mod config;
mod uvccmd;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use upss::Error;

#[derive(Parser)]
#[command(name = "upss", version, about = "User-centric private storage")]
struct Cli {
    /// Configuration file (key = value lines).
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Store topology, overriding the config file.
    #[arg(long, global = true, value_name = "SPEC")]
    store: Option<String>,

    /// Vault file, overriding the config file.
    #[arg(long, global = true, value_name = "FILE")]
    vault: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Initialize an empty filesystem and vault.
    Init,
    /// List the files at a path.
    Ls {
        #[arg(default_value = "/")]
        path: String,
    },
    /// Verbose information about a path.
    Info { path: String },
    /// Create a file at a path.
    Touch { path: String },
    /// Create a directory at a path.
    Mkdir { path: String },
    /// Append to a file.
    Append {
        path: String,
        /// Literal bytes to append.
        data: Option<String>,
        /// Read the bytes from a local file instead.
        #[arg(long, value_name = "FILE", conflicts_with = "data")]
        from: Option<PathBuf>,
    },
    /// Store a local file at a path within the tree.
    Store {
        source: PathBuf,
        path: String,
    },
    /// Print the history of a file's revisions.
    History {
        path: String,
        /// Walk at most this many versions.
        #[arg(long, value_name = "N")]
        depth: Option<usize>,
    },
    /// Print a file's block pointer.
    Name { path: String },
    /// List the block pointers in a path.
    Names { path: String },
    /// Print file content, by path or by block pointer.
    Get { target: String },
    /// Find the path under the root that a block pointer names.
    GetPath { pointer: String },
    /// Serve the configured store over TCP.
    Serve {
        /// Listen address, e.g. 127.0.0.1:7450.
        addr: String,
        /// Also accept version-control pushes, keeping the head here.
        #[arg(long, value_name = "HEAD_FILE")]
        uvc: Option<PathBuf>,
    },
    /// Private version control against a served store.
    Uvc {
        #[command(subcommand)]
        command: uvccmd::UvcCommand,
    },
}

/// Anything a command can fail with, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or an impossible request: exit 1.
    Usage(String),
    /// A push lost the race to another writer: exit 2.
    Rejected(String),
    /// A domain error from the library, mapped by variant.
    Lib(Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Rejected(_) => 2,
            Failure::Lib(e) => match e {
                Error::NoEntry(_) | Error::NotFound(_) => 2,
                Error::Auth => 3,
                Error::InvalidName(_)
                | Error::Exists(_)
                | Error::NotAFile(_)
                | Error::NotADirectory(_)
                | Error::Redacted
                | Error::Unreadable(_)
                | Error::OutOfRange { .. }
                | Error::Oversize { .. } => 1,
                _ => 4,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) | Failure::Rejected(msg) => write!(f, "{msg}"),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = config::load(cli.config.as_deref(), cli.store, cli.vault)?;
    match cli.command {
        Command::Init => commands::init(&cfg),
        Command::Ls { path } => commands::ls(&cfg, &path),
        Command::Info { path } => commands::info(&cfg, &path),
        Command::Touch { path } => commands::touch(&cfg, &path),
        Command::Mkdir { path } => commands::mkdir(&cfg, &path),
        Command::Append { path, data, from } => commands::append(&cfg, &path, data, from),
        Command::Store { source, path } => commands::store(&cfg, &source, &path),
        Command::History { path, depth } => commands::history(&cfg, &path, depth),
        Command::Name { path } => commands::name(&cfg, &path),
        Command::Names { path } => commands::names(&cfg, &path),
        Command::Get { target } => commands::get(&cfg, &target),
        Command::GetPath { pointer } => commands::get_path(&cfg, &pointer),
        Command::Serve { addr, uvc } => commands::serve(&cfg, &addr, uvc),
        Command::Uvc { command } => uvccmd::run(command),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("upss: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

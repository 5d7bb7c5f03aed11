//! Configuration: a flat file of `key = value` lines.
//!
//! ```text
//! store = cache(memory, file:/var/blocks, journal=/var/journal)
//! vault = /home/me/.upss.vault
//! passphrase_env = UPSS_PASSPHRASE
//! vault_iters = 600000
//! ```
//!
//! Command-line flags override file values. The passphrase comes from
//! the named environment variable, or from an explicit `passphrase =`
//! line for scripted setups that accept the exposure.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use upss::store::parse_topology;
use upss::vault::DEFAULT_ITERATIONS;
use upss::{BlockStore, Error};

use crate::Failure;

const DEFAULT_PASSPHRASE_ENV: &str = "UPSS_PASSPHRASE";

pub struct Config {
    pub store_spec: String,
    pub vault: PathBuf,
    passphrase: Option<String>,
    passphrase_env: String,
    pub vault_iters: u32,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            store_spec: "memory".into(),
            vault: PathBuf::from("upss.vault"),
            passphrase: None,
            passphrase_env: DEFAULT_PASSPHRASE_ENV.into(),
            vault_iters: DEFAULT_ITERATIONS,
        }
    }
}

/// Read the config file (if any), then apply flag overrides. A config
/// path given explicitly must exist; the default `upss.conf` is used
/// only when present.
pub fn load(
    explicit: Option<&Path>,
    store: Option<String>,
    vault: Option<PathBuf>,
) -> Result<Config, Failure> {
    let mut cfg = Config::default();

    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => {
            let fallback = PathBuf::from("upss.conf");
            fallback.exists().then_some(fallback)
        }
    };
    if let Some(path) = path {
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Failure::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        parse_into(&mut cfg, &text)?;
    }

    if let Some(spec) = store {
        cfg.store_spec = spec;
    }
    if let Some(vault) = vault {
        cfg.vault = vault;
    }
    Ok(cfg)
}

fn parse_into(cfg: &mut Config, text: &str) -> Result<(), Failure> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::Usage(format!(
                "config line {}: expected key = value, got {line:?}",
                lineno + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "store" => cfg.store_spec = value.to_string(),
            "vault" => cfg.vault = PathBuf::from(value),
            "passphrase" => cfg.passphrase = Some(value.to_string()),
            "passphrase_env" => cfg.passphrase_env = value.to_string(),
            "vault_iters" => {
                cfg.vault_iters = value.parse().map_err(|_| {
                    Failure::Usage(format!("config line {}: bad vault_iters", lineno + 1))
                })?;
            }
            other => {
                return Err(Failure::Usage(format!(
                    "config line {}: unknown key {other:?}",
                    lineno + 1
                )));
            }
        }
    }
    Ok(())
}

impl Config {
    pub fn open_store(&self) -> Result<Arc<dyn BlockStore>, Failure> {
        parse_topology(&self.store_spec).map_err(Failure::from)
    }

    pub fn passphrase(&self) -> Result<String, Failure> {
        if let Some(p) = &self.passphrase {
            return Ok(p.clone());
        }
        match std::env::var(&self.passphrase_env) {
            Ok(p) if !p.is_empty() => Ok(p),
            _ => {
                eprintln!(
                    "upss: no passphrase: set {} or add passphrase = ... to the config",
                    self.passphrase_env
                );
                Err(Failure::Lib(Error::Auth))
            }
        }
    }
}

//! On-disk layout of a simulation run:
//!
//! ```text
//! rundir/
//!   config.json      SimConfig
//!   directory.json   device public keys, as served by the cloud
//!   shard-<id>.log   append-only aggregate log per cloud shard
//!   ledger.json      plaintext shadow ledger
//!   keyring.json     owner keyring (mode 0600)
//!   metrics.json     RunMetrics
//! ```

use std::fs;
use std::io;
use std::path::Path;

use super::{run_simulation_in, HarnessError, ShadowLedger, SimConfig, SimulationRun};
use crate::client::OwnerKeyring;
use crate::cloud::{log_file_name, Cloud, CloudShard, DeviceDirectory};

pub const CONFIG_FILE: &str = "config.json";
pub const DIRECTORY_FILE: &str = "directory.json";
pub const LEDGER_FILE: &str = "ledger.json";
pub const KEYRING_FILE: &str = "keyring.json";
pub const METRICS_FILE: &str = "metrics.json";

/// Runs `cfg` with shard logs under `dir` and writes the remaining run files.
pub fn simulate_to_dir(cfg: &SimConfig, dir: &Path) -> Result<SimulationRun, HarnessError> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    for id in 0..cfg.shard_count {
        let log = dir.join(log_file_name(id));
        if log.exists() {
            return Err(HarnessError::Setup(format!("{} already exists; use a fresh run directory", log.display())));
        }
    }
    let run = run_simulation_in(cfg, dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_json())?;
    fs::write(dir.join(DIRECTORY_FILE), run.cloud.directory().to_json())?;
    fs::write(dir.join(LEDGER_FILE), run.ledger.to_json())?;
    fs::write(dir.join(METRICS_FILE), serde_json::to_string_pretty(&run.metrics)?)?;
    run.keyring.write_to(&dir.join(KEYRING_FILE))?;
    Ok(run)
}

pub fn load_config(dir: &Path) -> Result<SimConfig, HarnessError> {
    SimConfig::from_json(&fs::read_to_string(dir.join(CONFIG_FILE))?)
}

pub fn load_directory(dir: &Path) -> Result<DeviceDirectory, HarnessError> {
    Ok(DeviceDirectory::from_json(&fs::read_to_string(dir.join(DIRECTORY_FILE))?)?)
}

pub fn load_ledger(path: &Path) -> Result<ShadowLedger, HarnessError> {
    Ok(ShadowLedger::from_json(&fs::read_to_string(path)?)?)
}

pub fn load_keyring(path: &Path) -> Result<OwnerKeyring, HarnessError> {
    Ok(OwnerKeyring::read_from(path)?)
}

/// Rebuilds the cloud from the shard logs without writing to them. A missing
/// log yields an empty shard.
pub fn recover_cloud(dir: &Path) -> Result<Cloud, HarnessError> {
    let cfg = load_config(dir)?;
    let directory = load_directory(dir)?;
    let mut shards = Vec::with_capacity(cfg.shard_count as usize);
    for id in 0..cfg.shard_count {
        let path = dir.join(log_file_name(id));
        let shard = match CloudShard::recover(&path, id, cfg.shard_count) {
            Err(crate::cloud::CloudError::Io(e)) if e.kind() == io::ErrorKind::NotFound => {
                CloudShard::in_memory(id, cfg.shard_count)?
            }
            other => other?,
        };
        shards.push(shard);
    }
    Ok(Cloud::from_shards(shards, directory)?)
}

//! Per-region fog node.
//!
//! A fog node folds encrypted device reports into per-device, per-window
//! homomorphic sums and hands closed windows to cloud shards. It holds device
//! public keys only, so nothing it exposes can yield a plaintext.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{window_of, AggregateRecord, DeviceIdentity, EncryptedReport, Region};
use crate::paillier::{Fingerprint, PaillierError, PublicKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FogError {
    #[error("device {device} does not belong to region {region}")]
    ForeignDevice { device: DeviceIdentity, region: u32 },
    #[error("device {0} is not registered with this fog node")]
    UnregisteredDevice(DeviceIdentity),
    #[error("report from {device} encrypted under {found}, registered key is {expected}")]
    FingerprintMismatch { device: DeviceIdentity, expected: Fingerprint, found: Fingerprint },
    #[error("duplicate report from {device} at tick {tick}")]
    DuplicateTick { device: DeviceIdentity, tick: u64 },
    #[error("late report from {device} at tick {tick}: windows up to tick {closed_through} already flushed")]
    LateReport { device: DeviceIdentity, tick: u64, closed_through: u64 },
    #[error("shard count must be at least 1")]
    ZeroShards,
    #[error("window width must be positive")]
    ZeroWidth,
    #[error(transparent)]
    Crypto(#[from] PaillierError),
}

/// Deployment-wide fog settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FogConfig {
    pub window_width_ticks: u64,
    pub shard_count: u32,
}

/// Cloud shard responsible for a window: round-robin over time, so with two
/// or more shards consecutive windows of a device never share a shard.
pub fn shard_for(window_index: u64, shard_count: u32) -> Result<u32, FogError> {
    if shard_count == 0 {
        return Err(FogError::ZeroShards);
    }
    Ok((window_index % u64::from(shard_count)) as u32)
}

#[derive(Debug)]
struct OpenWindow {
    record: AggregateRecord,
    ticks: BTreeSet<u64>,
}

#[derive(Debug)]
pub struct FogNode {
    id: String,
    region: Region,
    config: FogConfig,
    registry: BTreeMap<DeviceIdentity, PublicKey>,
    open_windows: BTreeMap<(DeviceIdentity, u64), OpenWindow>,
    // Every window ending at or before this tick has been flushed.
    closed_through: u64,
    rng: ChaCha20Rng,
}

impl FogNode {
    /// `seed` drives the rerandomization nonces applied on flush.
    pub fn new(region: Region, config: FogConfig, seed: u64) -> Result<Self, FogError> {
        if config.shard_count == 0 {
            return Err(FogError::ZeroShards);
        }
        if config.window_width_ticks == 0 {
            return Err(FogError::ZeroWidth);
        }
        Ok(FogNode {
            id: region.fog_node_id.clone(),
            region,
            config,
            registry: BTreeMap::new(),
            open_windows: BTreeMap::new(),
            closed_through: 0,
            rng: ChaCha20Rng::seed_from_u64(seed),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn config(&self) -> FogConfig {
        self.config
    }

    pub fn register(&mut self, device: DeviceIdentity, key: PublicKey) -> Result<(), FogError> {
        if !self.region.contains(&device) {
            return Err(FogError::ForeignDevice { device, region: self.region.index });
        }
        self.registry.insert(device, key);
        Ok(())
    }

    pub fn open_window_count(&self) -> usize {
        self.open_windows.len()
    }

    /// Running aggregate for `(device, window index)`, if that window is open.
    pub fn open_aggregate(&self, device: &DeviceIdentity, window_index: u64) -> Option<&AggregateRecord> {
        self.open_windows.get(&(*device, window_index)).map(|w| &w.record)
    }

    pub fn ingest(&mut self, report: EncryptedReport) -> Result<(), FogError> {
        let device = report.device;
        if !self.region.contains(&device) {
            return Err(FogError::ForeignDevice { device, region: self.region.index });
        }
        let key = self.registry.get(&device).ok_or(FogError::UnregisteredDevice(device))?;
        if report.key_fingerprint() != key.fingerprint() {
            return Err(FogError::FingerprintMismatch {
                device,
                expected: key.fingerprint().clone(),
                found: report.key_fingerprint().clone(),
            });
        }
        key.validate(&report.ciphertext)?;

        let window = window_of(report.timestamp, self.config.window_width_ticks).map_err(|_| FogError::ZeroWidth)?;
        if window.end_tick() <= self.closed_through {
            return Err(FogError::LateReport { device, tick: report.timestamp, closed_through: self.closed_through });
        }

        match self.open_windows.get_mut(&(device, window.index)) {
            Some(open) => {
                if open.ticks.contains(&report.timestamp) {
                    return Err(FogError::DuplicateTick { device, tick: report.timestamp });
                }
                open.record.ciphertext = key.add(&open.record.ciphertext, &report.ciphertext)?;
                open.record.report_count += 1;
                open.ticks.insert(report.timestamp);
            }
            None => {
                let record = AggregateRecord { device, window, ciphertext: report.ciphertext, report_count: 1 };
                let ticks = BTreeSet::from([report.timestamp]);
                self.open_windows.insert((device, window.index), OpenWindow { record, ticks });
            }
        }
        Ok(())
    }

    /// Flushes every open window ending at or before `up_to_tick`.
    ///
    /// Emitted records are rerandomized and tagged with their shard, ordered
    /// by device and then window index.
    pub fn close_window(&mut self, up_to_tick: u64) -> Result<Vec<(u32, AggregateRecord)>, FogError> {
        let due: Vec<(DeviceIdentity, u64)> = self
            .open_windows
            .iter()
            .filter(|(_, w)| w.record.window.end_tick() <= up_to_tick)
            .map(|(k, _)| *k)
            .collect();

        let mut emitted = Vec::with_capacity(due.len());
        for key in due {
            let open = self.open_windows.remove(&key).expect("key collected above");
            let pk = &self.registry[&key.0];
            let mut record = open.record;
            record.ciphertext = pk.rerandomize(&record.ciphertext, &mut self.rng)?;
            let shard = shard_for(record.window.index, self.config.shard_count)?;
            emitted.push((shard, record));
        }
        self.closed_through = self.closed_through.max(up_to_tick);
        Ok(emitted)
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::log::{log_file_name, scan_log, ShardLog};
use super::{CloudError, WindowRange};
use crate::fog::shard_for;
use crate::model::{AggregateRecord, DeviceIdentity};
use crate::paillier::{Ciphertext, PublicKey};

/// One outsourced storage node. Holds ciphertext aggregates for the windows
/// routed to it and nothing else.
#[derive(Debug)]
pub struct CloudShard {
    shard_id: u32,
    shard_count: u32,
    records: BTreeMap<(DeviceIdentity, u64), AggregateRecord>,
    log: Option<ShardLog>,
}

impl CloudShard {
    pub fn in_memory(shard_id: u32, shard_count: u32) -> Result<Self, CloudError> {
        if shard_id >= shard_count {
            return Err(CloudError::NoSuchShard(shard_id));
        }
        Ok(CloudShard { shard_id, shard_count, records: BTreeMap::new(), log: None })
    }

    /// Opens the shard persisted under `dir`, replaying `shard-<id>.log` if it
    /// exists and creating it otherwise.
    pub fn open(dir: &Path, shard_id: u32, shard_count: u32) -> Result<Self, CloudError> {
        let path = dir.join(log_file_name(shard_id));
        let mut shard = match fs::read(&path) {
            Ok(bytes) => Self::replay(&path, &bytes, shard_id, shard_count)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Self::in_memory(shard_id, shard_count)?,
            Err(e) => return Err(e.into()),
        };
        shard.log = Some(ShardLog::open_append(&path)?);
        Ok(shard)
    }

    /// Rebuilds a shard from its log file. Read-only: the returned shard does
    /// not append to the file.
    pub fn recover(path: &Path, shard_id: u32, shard_count: u32) -> Result<Self, CloudError> {
        let bytes = fs::read(path)?;
        Self::replay(path, &bytes, shard_id, shard_count)
    }

    fn replay(path: &Path, bytes: &[u8], shard_id: u32, shard_count: u32) -> Result<Self, CloudError> {
        let mut shard = Self::in_memory(shard_id, shard_count)?;
        let corrupt = |offset: u64, reason: String| CloudError::CorruptLog { path: PathBuf::from(path), offset, reason };
        let replay = scan_log(bytes);
        for (offset, rec) in replay.records {
            shard.insert(rec).map_err(|e| corrupt(offset, e.to_string()))?;
        }
        if let Some((offset, reason)) = replay.corrupt {
            return Err(corrupt(offset, reason));
        }
        Ok(shard)
    }

    fn check(&self, rec: &AggregateRecord) -> Result<(), CloudError> {
        let expected = shard_for(rec.window.index, self.shard_count).expect("shard_count >= 1");
        if expected != self.shard_id {
            return Err(CloudError::WrongShard { shard: self.shard_id, expected, window: rec.window.index });
        }
        if self.records.contains_key(&(rec.device, rec.window.index)) {
            return Err(CloudError::DuplicateWindow { device: rec.device, window: rec.window.index });
        }
        Ok(())
    }

    fn insert(&mut self, rec: AggregateRecord) -> Result<(), CloudError> {
        self.check(&rec)?;
        self.records.insert((rec.device, rec.window.index), rec);
        Ok(())
    }

    /// Persists an aggregate. Aggregates are immutable once stored.
    pub fn store(&mut self, rec: AggregateRecord) -> Result<(), CloudError> {
        self.check(&rec)?;
        if let Some(log) = self.log.as_mut() {
            log.append(&rec)?;
        }
        self.records.insert((rec.device, rec.window.index), rec);
        Ok(())
    }

    pub fn shard_id(&self) -> u32 {
        self.shard_id
    }

    pub fn shard_count(&self) -> u32 {
        self.shard_count
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log.as_ref().map(|l| l.path())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, device: &DeviceIdentity, window_index: u64) -> Option<&AggregateRecord> {
        self.records.get(&(*device, window_index))
    }

    pub fn records(&self) -> impl Iterator<Item = &AggregateRecord> {
        self.records.values()
    }

    pub fn holds_device(&self, device: &DeviceIdentity) -> bool {
        self.records_for(device, WindowRange::All).next().is_some()
    }

    /// This shard's records for `device` within `range`, in window order.
    pub fn records_for<'a>(
        &'a self,
        device: &DeviceIdentity,
        range: WindowRange,
    ) -> impl Iterator<Item = &'a AggregateRecord> + 'a {
        let (lo, hi) = range.bounds();
        self.records.range((*device, lo)..=(*device, hi)).map(|(_, r)| r)
    }

    /// Homomorphic sum of this shard's in-range ciphertexts for `device`.
    pub fn partial_sum(
        &self,
        key: &PublicKey,
        device: &DeviceIdentity,
        range: WindowRange,
    ) -> Result<Option<Ciphertext>, CloudError> {
        let mut acc: Option<Ciphertext> = None;
        for rec in self.records_for(device, range) {
            acc = Some(match acc {
                None => {
                    key.validate(&rec.ciphertext)?;
                    rec.ciphertext.clone()
                }
                Some(sum) => key.add(&sum, &rec.ciphertext)?,
            });
        }
        Ok(acc)
    }
}

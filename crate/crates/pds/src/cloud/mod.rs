//! Outsourced cloud storage.
//!
//! Each [`CloudShard`] persists the window aggregates routed to it in an
//! append-only log. [`Cloud`] is the query coordinator: it gathers a device's
//! records across every shard, answers identity-number queries and sums
//! ciphertexts homomorphically. Only public keys are ever present here.

pub mod log;
mod shard;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::wire::{aggregate_list, decode_frame, encode_frame, WireError, WIRE_VERSION};
use crate::model::{AggregateRecord, DeviceIdentity};
use crate::paillier::{Ciphertext, Fingerprint, PaillierError, PublicKey};

pub use log::{encode_log_frame, log_file_name, scan_log, LogReplay};
pub use shard::CloudShard;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("window {window} routes to shard {expected}, not shard {shard}")]
    WrongShard { shard: u32, expected: u32, window: u64 },
    #[error("an aggregate for {device} window {window} is already stored")]
    DuplicateWindow { device: DeviceIdentity, window: u64 },
    #[error("unknown device {0:?}")]
    UnknownDevice(String),
    #[error("no records in the requested range")]
    EmptyRange,
    #[error("invalid window range [{from}, {to}]")]
    InvalidRange { from: u64, to: u64 },
    #[error("no shard {0} in this deployment")]
    NoSuchShard(u32),
    #[error("record for {device} encrypted under {found}, directory key is {expected}")]
    KeyMismatch { device: DeviceIdentity, expected: Fingerprint, found: Fingerprint },
    #[error("corrupt log {path:?} at offset {offset}: {reason}")]
    CorruptLog { path: PathBuf, offset: u64, reason: String },
    #[error("shard storage: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Crypto(#[from] PaillierError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Inclusive window-index range of a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowRange {
    All,
    Span { from: u64, to: u64 },
}

impl WindowRange {
    pub fn span(from: u64, to: u64) -> Result<Self, CloudError> {
        if from > to {
            return Err(CloudError::InvalidRange { from, to });
        }
        Ok(WindowRange::Span { from, to })
    }

    pub fn contains(&self, index: u64) -> bool {
        match *self {
            WindowRange::All => true,
            WindowRange::Span { from, to } => (from..=to).contains(&index),
        }
    }

    pub(crate) fn bounds(&self) -> (u64, u64) {
        match *self {
            WindowRange::All => (0, u64::MAX),
            WindowRange::Span { from, to } => (from, to),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryRequest {
    pub id_number: String,
    pub range: WindowRange,
    pub combine: bool,
}

impl QueryRequest {
    pub fn all(id_number: impl Into<String>, combine: bool) -> Self {
        QueryRequest { id_number: id_number.into(), range: WindowRange::All, combine }
    }

    pub fn span(id_number: impl Into<String>, from: u64, to: u64, combine: bool) -> Result<Self, CloudError> {
        Ok(QueryRequest { id_number: id_number.into(), range: WindowRange::span(from, to)?, combine })
    }

    pub fn to_frame(&self) -> Vec<u8> {
        let (from, to) = match self.range {
            WindowRange::All => (None, None),
            WindowRange::Span { from, to } => (Some(from), Some(to)),
        };
        encode_frame(&QueryRequestFrame { v: WIRE_VERSION, dev: self.id_number.clone(), from, to, combine: self.combine })
    }

    pub fn from_frame(bytes: &[u8]) -> Result<Self, CloudError> {
        let f: QueryRequestFrame = decode_frame(bytes)?;
        let range = match (f.from, f.to) {
            (None, None) => WindowRange::All,
            (Some(from), Some(to)) => WindowRange::span(from, to)?,
            _ => return Err(WireError::InvalidContent("\"from\" and \"to\" must be given together".into()).into()),
        };
        Ok(QueryRequest { id_number: f.dev, range, combine: f.combine })
    }
}

/// Ciphertext-only answer to a [`QueryRequest`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryResponse {
    pub device: DeviceIdentity,
    pub records: Vec<AggregateRecord>,
    pub combined: Option<Ciphertext>,
    pub key_fingerprint: Fingerprint,
}

impl QueryResponse {
    pub fn to_frame(&self) -> Vec<u8> {
        encode_frame(&QueryResponseFrameRef {
            v: WIRE_VERSION,
            dev: self.device,
            records: &self.records,
            combined: self.combined.as_ref(),
            kfp: &self.key_fingerprint,
        })
    }

    pub fn from_frame(bytes: &[u8]) -> Result<Self, CloudError> {
        let f: QueryResponseFrame = decode_frame(bytes)?;
        let consistent = f.records.iter().map(|r| r.key_fingerprint()).chain(f.combined.as_ref().map(|c| c.key_fingerprint())).all(|k| *k == f.kfp);
        if !consistent {
            return Err(WireError::InvalidContent("records encrypted under different keys".into()).into());
        }
        Ok(QueryResponse { device: f.dev, records: f.records, combined: f.combined, key_fingerprint: f.kfp })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRequestFrame {
    v: u64,
    dev: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    from: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<u64>,
    combine: bool,
}

#[derive(Serialize)]
struct QueryResponseFrameRef<'a> {
    v: u64,
    dev: DeviceIdentity,
    #[serde(with = "aggregate_list")]
    records: &'a [AggregateRecord],
    #[serde(skip_serializing_if = "Option::is_none")]
    combined: Option<&'a Ciphertext>,
    kfp: &'a Fingerprint,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryResponseFrame {
    #[allow(dead_code)]
    v: u64,
    dev: DeviceIdentity,
    #[serde(with = "aggregate_list")]
    records: Vec<AggregateRecord>,
    #[serde(default)]
    combined: Option<Ciphertext>,
    kfp: Fingerprint,
}

/// Public keys of the devices the cloud serves, keyed by identity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DeviceDirectory(BTreeMap<DeviceIdentity, PublicKey>);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectoryEntry {
    dev: DeviceIdentity,
    public: PublicKey,
}

impl DeviceDirectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, device: DeviceIdentity, key: PublicKey) {
        self.0.insert(device, key);
    }

    pub fn get(&self, device: &DeviceIdentity) -> Option<&PublicKey> {
        self.0.get(device)
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceIdentity> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<DirectoryEntry> =
            self.0.iter().map(|(d, k)| DirectoryEntry { dev: *d, public: k.clone() }).collect();
        serde_json::to_string_pretty(&entries).expect("directory serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let entries: Vec<DirectoryEntry> = serde_json::from_str(text)?;
        Ok(DeviceDirectory(entries.into_iter().map(|e| (e.dev, e.public)).collect()))
    }
}

impl FromIterator<(DeviceIdentity, PublicKey)> for DeviceDirectory {
    fn from_iter<I: IntoIterator<Item = (DeviceIdentity, PublicKey)>>(iter: I) -> Self {
        DeviceDirectory(iter.into_iter().collect())
    }
}

/// Query coordinator over all shards.
#[derive(Debug)]
pub struct Cloud {
    shards: Vec<CloudShard>,
    directory: DeviceDirectory,
}

impl Cloud {
    pub fn in_memory(shard_count: u32, directory: DeviceDirectory) -> Result<Self, CloudError> {
        let shards = (0..shard_count).map(|id| CloudShard::in_memory(id, shard_count)).collect::<Result<_, _>>()?;
        Self::from_shards(shards, directory)
    }

    /// Opens (recovering where logs exist) every shard under `dir`.
    pub fn open(dir: &Path, shard_count: u32, directory: DeviceDirectory) -> Result<Self, CloudError> {
        let shards = (0..shard_count).map(|id| CloudShard::open(dir, id, shard_count)).collect::<Result<_, _>>()?;
        Self::from_shards(shards, directory)
    }

    pub fn from_shards(shards: Vec<CloudShard>, directory: DeviceDirectory) -> Result<Self, CloudError> {
        if shards.is_empty() {
            return Err(CloudError::NoSuchShard(0));
        }
        let count = shards.len() as u32;
        for (i, s) in shards.iter().enumerate() {
            if s.shard_id() != i as u32 || s.shard_count() != count {
                return Err(CloudError::NoSuchShard(s.shard_id()));
            }
        }
        Ok(Cloud { shards, directory })
    }

    pub fn shard_count(&self) -> u32 {
        self.shards.len() as u32
    }

    pub fn shards(&self) -> &[CloudShard] {
        &self.shards
    }

    pub fn shard(&self, id: u32) -> Option<&CloudShard> {
        self.shards.get(id as usize)
    }

    pub fn directory(&self) -> &DeviceDirectory {
        &self.directory
    }

    /// Swaps in a restarted shard (typically one rebuilt from its log) and
    /// returns the one it replaces.
    pub fn replace_shard(&mut self, shard: CloudShard) -> Result<CloudShard, CloudError> {
        let id = shard.shard_id();
        if shard.shard_count() != self.shard_count() {
            return Err(CloudError::NoSuchShard(id));
        }
        let slot = self.shards.get_mut(id as usize).ok_or(CloudError::NoSuchShard(id))?;
        Ok(std::mem::replace(slot, shard))
    }

    /// Stores a record delivered to shard `shard_id`.
    pub fn store(&mut self, shard_id: u32, rec: AggregateRecord) -> Result<(), CloudError> {
        let key = self.directory.get(&rec.device).ok_or_else(|| CloudError::UnknownDevice(rec.device.to_string()))?;
        if rec.key_fingerprint() != key.fingerprint() {
            return Err(CloudError::KeyMismatch {
                device: rec.device,
                expected: key.fingerprint().clone(),
                found: rec.key_fingerprint().clone(),
            });
        }
        let shard = self.shards.get_mut(shard_id as usize).ok_or(CloudError::NoSuchShard(shard_id))?;
        shard.store(rec)
    }

    fn resolve(&self, id_number: &str) -> Result<(DeviceIdentity, &PublicKey), CloudError> {
        let device: DeviceIdentity = id_number.parse().map_err(|_| CloudError::UnknownDevice(id_number.to_owned()))?;
        let key = self.directory.get(&device).ok_or_else(|| CloudError::UnknownDevice(id_number.to_owned()))?;
        Ok((device, key))
    }

    /// Every stored record for `device` in `range`, gathered across shards
    /// and sorted by window index.
    pub fn gather(&self, device: &DeviceIdentity, range: WindowRange) -> Vec<AggregateRecord> {
        let mut records: Vec<AggregateRecord> =
            self.shards.iter().flat_map(|s| s.records_for(device, range).cloned()).collect();
        records.sort_by_key(|r| r.window.index);
        records
    }

    pub fn query(&self, req: &QueryRequest) -> Result<QueryResponse, CloudError> {
        let (device, key) = self.resolve(&req.id_number)?;
        let records = self.gather(&device, req.range);
        if records.is_empty() {
            return Err(CloudError::EmptyRange);
        }
        let combined = if req.combine {
            // shard-local partial sums, folded here
            let mut acc: Option<Ciphertext> = None;
            for shard in &self.shards {
                if let Some(part) = shard.partial_sum(key, &device, req.range)? {
                    acc = Some(match acc {
                        None => part,
                        Some(sum) => key.add(&sum, &part)?,
                    });
                }
            }
            acc
        } else {
            None
        };
        Ok(QueryResponse { device, records, combined, key_fingerprint: key.fingerprint().clone() })
    }

    /// Homomorphic sum over `range`, folded in window order.
    pub fn aggregate_range(&self, device: &DeviceIdentity, range: WindowRange) -> Result<Ciphertext, CloudError> {
        let key = self.directory.get(device).ok_or_else(|| CloudError::UnknownDevice(device.to_string()))?;
        let records = self.gather(device, range);
        let (first, rest) = records.split_first().ok_or(CloudError::EmptyRange)?;
        key.validate(&first.ciphertext)?;
        rest.iter().try_fold(first.ciphertext.clone(), |acc, r| key.add(&acc, &r.ciphertext).map_err(Into::into))
    }

    /// Decodes a request frame, answers it and encodes the response frame.
    pub fn handle_query_frame(&self, request: &[u8]) -> Result<Vec<u8>, CloudError> {
        let req = QueryRequest::from_frame(request)?;
        Ok(self.query(&req)?.to_frame())
    }
}

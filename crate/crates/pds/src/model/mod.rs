//! Shared vocabulary for every tier: device identities, regions, readings,
//! encrypted reports, aggregation windows and the records that flow from fog
//! nodes to cloud shards.

pub mod wire;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::paillier::{Ciphertext, Fingerprint};

pub use wire::{decode_aggregate, decode_report, encode_aggregate, encode_report, WireError, WIRE_VERSION};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("window width must be positive")]
    ZeroWidth,
    #[error("window start {start_tick} is not a multiple of width {width}")]
    UnalignedWindow { start_tick: u64, width: u64 },
    #[error("invalid identity number {0:?}, expected R<i>-I<j> with i, j >= 1")]
    InvalidIdentity(String),
}

/// `I_ij`: device `j` of region `i`, rendered as `R<i>-I<j>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeviceIdentity {
    region_index: u32,
    device_index: u32,
}

impl DeviceIdentity {
    pub fn new(region_index: u32, device_index: u32) -> Result<Self, ModelError> {
        if region_index == 0 || device_index == 0 {
            return Err(ModelError::InvalidIdentity(format!("R{region_index}-I{device_index}")));
        }
        Ok(DeviceIdentity { region_index, device_index })
    }

    pub fn region_index(&self) -> u32 {
        self.region_index
    }

    pub fn device_index(&self) -> u32 {
        self.device_index
    }

    pub fn id_number(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DeviceIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}-I{}", self.region_index, self.device_index)
    }
}

fn parse_index(s: &str) -> Option<u32> {
    if s.is_empty() || s.starts_with('0') || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

impl FromStr for DeviceIdentity {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidIdentity(s.to_owned());
        let rest = s.strip_prefix('R').ok_or_else(bad)?;
        let (region, device) = rest.split_once("-I").ok_or_else(bad)?;
        let region = parse_index(region).ok_or_else(bad)?;
        let device = parse_index(device).ok_or_else(bad)?;
        DeviceIdentity::new(region, device)
    }
}

impl Serialize for DeviceIdentity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DeviceIdentity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `R_i` and the single fog node serving it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub index: u32,
    pub device_count: u32,
    pub fog_node_id: String,
}

impl Region {
    pub fn new(index: u32, device_count: u32) -> Self {
        assert!(index >= 1 && device_count >= 1, "regions and their devices are 1-indexed");
        Region { index, device_count, fog_node_id: format!("FN{index}") }
    }

    pub fn contains(&self, device: &DeviceIdentity) -> bool {
        device.region_index == self.index && device.device_index <= self.device_count
    }

    pub fn devices(&self) -> impl Iterator<Item = DeviceIdentity> + '_ {
        (1..=self.device_count).map(move |j| DeviceIdentity { region_index: self.index, device_index: j })
    }
}

/// A plaintext reading. Only the device owner and the harness ledger ever see these.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Reading {
    pub device: DeviceIdentity,
    pub timestamp: u64,
    pub value: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptedReport {
    pub device: DeviceIdentity,
    pub timestamp: u64,
    pub ciphertext: Ciphertext,
}

impl EncryptedReport {
    pub fn key_fingerprint(&self) -> &Fingerprint {
        self.ciphertext.key_fingerprint()
    }
}

/// Half-open tick interval `[start_tick, start_tick + width)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowId {
    pub start_tick: u64,
    pub width: u64,
    pub index: u64,
}

impl WindowId {
    pub fn end_tick(&self) -> u64 {
        self.start_tick + self.width
    }

    pub fn contains(&self, tick: u64) -> bool {
        tick >= self.start_tick && tick < self.end_tick()
    }

    /// Rebuilds a window from its start and width, rejecting unaligned starts.
    pub fn from_start(start_tick: u64, width: u64) -> Result<Self, ModelError> {
        let w = window_of(start_tick, width)?;
        if w.start_tick != start_tick {
            return Err(ModelError::UnalignedWindow { start_tick, width });
        }
        Ok(w)
    }
}

pub fn window_of(timestamp: u64, width: u64) -> Result<WindowId, ModelError> {
    if width == 0 {
        return Err(ModelError::ZeroWidth);
    }
    let index = timestamp / width;
    Ok(WindowId { start_tick: index * width, width, index })
}

/// Homomorphic sum of one device's reports over one window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregateRecord {
    pub device: DeviceIdentity,
    pub window: WindowId,
    pub ciphertext: Ciphertext,
    pub report_count: u64,
}

impl AggregateRecord {
    pub fn key_fingerprint(&self) -> &Fingerprint {
        self.ciphertext.key_fingerprint()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_boundaries() {
        assert_eq!(window_of(0, 10).unwrap(), WindowId { start_tick: 0, width: 10, index: 0 });
        assert_eq!(window_of(10, 10).unwrap(), WindowId { start_tick: 10, width: 10, index: 1 });
        assert_eq!(window_of(37, 10).unwrap(), WindowId { start_tick: 30, width: 10, index: 3 });
        assert_eq!(window_of(5, 0).unwrap_err(), ModelError::ZeroWidth);
        let w = window_of(9, 10).unwrap();
        assert!(w.contains(9) && !w.contains(10));
    }

    #[test]
    fn identity_rendering() {
        let d = DeviceIdentity::new(1, 2).unwrap();
        assert_eq!(d.id_number(), "R1-I2");
        assert_eq!("R1-I2".parse::<DeviceIdentity>().unwrap(), d);
        assert_eq!("R12-I305".parse::<DeviceIdentity>().unwrap(), DeviceIdentity::new(12, 305).unwrap());
        for bad in ["", "R1", "R0-I1", "R1-I0", "r1-i2", "R01-I2", "R1-I2x", "R-I2", "R1-I-2", "1-2"] {
            assert!(bad.parse::<DeviceIdentity>().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn region_membership() {
        let r = Region::new(2, 3);
        assert_eq!(r.fog_node_id, "FN2");
        let ids: Vec<String> = r.devices().map(|d| d.to_string()).collect();
        assert_eq!(ids, ["R2-I1", "R2-I2", "R2-I3"]);
        assert!(r.contains(&DeviceIdentity::new(2, 3).unwrap()));
        assert!(!r.contains(&DeviceIdentity::new(2, 4).unwrap()));
        assert!(!r.contains(&DeviceIdentity::new(1, 1).unwrap()));
    }
}

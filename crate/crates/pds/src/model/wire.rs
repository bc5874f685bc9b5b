//! Canonical JSON frames exchanged between tiers.
//!
//! One object per frame, compact, fields in a fixed order, version field
//! `"v"` first. Decoding first checks the version, then parses the frame
//! strictly (unknown fields rejected).

use num_bigint::BigUint;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AggregateRecord, DeviceIdentity, EncryptedReport, WindowId};
use crate::paillier::{hex_biguint, Ciphertext, Fingerprint};

pub const WIRE_VERSION: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed frame at line {line}, column {column}: {reason}")]
    MalformedFrame { line: usize, column: usize, reason: String },
    #[error("unsupported frame version {0}")]
    UnsupportedVersion(u64),
    #[error("invalid frame content: {0}")]
    InvalidContent(String),
}

impl From<serde_json::Error> for WireError {
    fn from(e: serde_json::Error) -> Self {
        let full = e.to_string();
        // serde_json appends the position, which the variant already carries
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        let reason = full.strip_suffix(&suffix).unwrap_or(&full).to_owned();
        WireError::MalformedFrame { line: e.line(), column: e.column(), reason }
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    v: u64,
}

/// Serializes a frame struct. Field order follows the struct declaration.
pub fn encode_frame<T: Serialize>(frame: &T) -> Vec<u8> {
    serde_json::to_vec(frame).expect("frame types serialize infallibly")
}

/// Version-checked strict decode of any frame type.
pub fn decode_frame<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, WireError> {
    let probe: VersionProbe = serde_json::from_slice(bytes)?;
    if probe.v != WIRE_VERSION {
        return Err(WireError::UnsupportedVersion(probe.v));
    }
    Ok(serde_json::from_slice(bytes)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportFrame {
    v: u64,
    dev: DeviceIdentity,
    ts: u64,
    #[serde(with = "hex_biguint")]
    c: BigUint,
    kfp: Fingerprint,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct AggregateFrame {
    v: u64,
    dev: DeviceIdentity,
    win_start: u64,
    win_width: u64,
    #[serde(with = "hex_biguint")]
    c: BigUint,
    kfp: Fingerprint,
    count: u64,
}

impl From<&AggregateRecord> for AggregateFrame {
    fn from(r: &AggregateRecord) -> Self {
        AggregateFrame {
            v: WIRE_VERSION,
            dev: r.device,
            win_start: r.window.start_tick,
            win_width: r.window.width,
            c: r.ciphertext.value().clone(),
            kfp: r.key_fingerprint().clone(),
            count: r.report_count,
        }
    }
}

impl TryFrom<AggregateFrame> for AggregateRecord {
    type Error = WireError;

    fn try_from(f: AggregateFrame) -> Result<Self, WireError> {
        let window =
            WindowId::from_start(f.win_start, f.win_width).map_err(|e| WireError::InvalidContent(e.to_string()))?;
        if f.count == 0 || f.count > f.win_width {
            return Err(WireError::InvalidContent(format!(
                "report count {} outside [1, {}]",
                f.count, f.win_width
            )));
        }
        Ok(AggregateRecord {
            device: f.dev,
            window,
            ciphertext: Ciphertext::from_parts(f.c, f.kfp),
            report_count: f.count,
        })
    }
}

/// Serde adapter so composite frames can embed aggregate records in wire form.
pub(crate) mod aggregate_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(records: &[AggregateRecord], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(records.iter().map(AggregateFrame::from))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<AggregateRecord>, D::Error> {
        Vec::<AggregateFrame>::deserialize(d)?
            .into_iter()
            .map(|f| {
                if f.v != WIRE_VERSION {
                    return Err(serde::de::Error::custom(WireError::UnsupportedVersion(f.v)));
                }
                AggregateRecord::try_from(f).map_err(serde::de::Error::custom)
            })
            .collect()
    }
}

pub fn encode_report(r: &EncryptedReport) -> Vec<u8> {
    encode_frame(&ReportFrame {
        v: WIRE_VERSION,
        dev: r.device,
        ts: r.timestamp,
        c: r.ciphertext.value().clone(),
        kfp: r.key_fingerprint().clone(),
    })
}

pub fn decode_report(bytes: &[u8]) -> Result<EncryptedReport, WireError> {
    let f: ReportFrame = decode_frame(bytes)?;
    Ok(EncryptedReport { device: f.dev, timestamp: f.ts, ciphertext: Ciphertext::from_parts(f.c, f.kfp) })
}

pub fn encode_aggregate(r: &AggregateRecord) -> Vec<u8> {
    encode_frame(&AggregateFrame::from(r))
}

pub fn decode_aggregate(bytes: &[u8]) -> Result<AggregateRecord, WireError> {
    let f: AggregateFrame = decode_frame(bytes)?;
    AggregateRecord::try_from(f)
}

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::ledger::ShadowLedger;
use crate::client::OwnerKeyring;
use crate::cloud::{Cloud, WindowRange};
use crate::fog::shard_for;
use crate::model::DeviceIdentity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// The routed shard holds the window the fog emitted (and nothing extra).
    GatherCompleteness,
    /// A stored aggregate decrypts to its ledger sum and carries its report count.
    WindowSum,
    /// Cloud-side range aggregation decrypts to the device's grand total.
    GrandTotal,
    /// No single shard holds every window of a device.
    Partition,
    /// Stored report counts add up to the ledger's.
    CountAccounting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Not evaluated because a more specific check on the same data failed.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub kind: CheckKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub device: Option<DeviceIdentity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shard: Option<u32>,
    pub status: Status,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckOutcome>,
    pub decryptions: u64,
}

impl VerificationReport {
    fn push(
        &mut self,
        kind: CheckKind,
        device: Option<DeviceIdentity>,
        window: Option<u64>,
        shard: Option<u32>,
        status: Status,
        detail: impl Into<String>,
    ) {
        self.checks.push(CheckOutcome { kind, device, window, shard, status, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn tally(&self, kind: CheckKind) -> Tally {
        let mut t = Tally::default();
        for c in self.checks.iter().filter(|c| c.kind == kind) {
            match c.status {
                Status::Pass => t.pass += 1,
                Status::Fail => t.fail += 1,
                Status::Skipped => t.skipped += 1,
            }
        }
        t
    }

    /// One-line JSON summary with per-check counts.
    pub fn summary_line(&self) -> String {
        let kinds = [
            CheckKind::GatherCompleteness,
            CheckKind::WindowSum,
            CheckKind::GrandTotal,
            CheckKind::Partition,
            CheckKind::CountAccounting,
        ];
        let per_kind: serde_json::Map<String, serde_json::Value> = kinds
            .iter()
            .map(|k| {
                let name = serde_json::to_value(k).unwrap().as_str().unwrap().to_owned();
                (name, serde_json::to_value(self.tally(*k)).unwrap())
            })
            .collect();
        serde_json::json!({ "passed": self.passed(), "checks": per_kind }).to_string()
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.failures() {
            write!(f, "FAIL {:?}", c.kind)?;
            if let Some(d) = c.device {
                write!(f, " {d}")?;
            }
            if let Some(w) = c.window {
                write!(f, " window {w}")?;
            }
            if let Some(s) = c.shard {
                write!(f, " shard {s}")?;
            }
            writeln!(f, ": {}", c.detail)?;
        }
        write!(f, "{}", if self.passed() { "verification passed" } else { "verification FAILED" })
    }
}

/// Checks stored state against the plaintext ledger. Never errors: every
/// problem becomes a failed check entry.
pub fn verify(cloud: &Cloud, keyring: &OwnerKeyring, ledger: &ShadowLedger) -> VerificationReport {
    use CheckKind::*;
    let mut report = VerificationReport::default();
    let n_shards = cloud.shard_count();
    let mut broken_devices: BTreeSet<DeviceIdentity> = BTreeSet::new();
    let mut gather_failed = false;

    for (device, index, entry) in ledger.windows() {
        let shard = shard_for(index, n_shards).expect("cloud has at least one shard");
        let found = cloud.shard(shard).and_then(|s| s.get(&device, index));
        let Some(rec) = found else {
            report.push(GatherCompleteness, Some(device), Some(index), Some(shard), Status::Fail, "window missing");
            report.push(WindowSum, Some(device), Some(index), Some(shard), Status::Skipped, "no stored record");
            broken_devices.insert(device);
            gather_failed = true;
            continue;
        };
        report.push(GatherCompleteness, Some(device), Some(index), Some(shard), Status::Pass, "");

        let Some(kp) = keyring.key_pair(&device) else {
            report.push(WindowSum, Some(device), Some(index), Some(shard), Status::Fail, "no owner key");
            broken_devices.insert(device);
            continue;
        };
        report.decryptions += 1;
        let (status, detail) = match kp.private.decrypt_signed(&rec.ciphertext) {
            Ok(sum) if sum == entry.sum && rec.report_count == entry.count => (Status::Pass, String::new()),
            Ok(sum) => (
                Status::Fail,
                format!("decrypted {sum} (count {}), ledger {} (count {})", rec.report_count, entry.sum, entry.count),
            ),
            Err(e) => (Status::Fail, format!("decrypt: {e}")),
        };
        if status == Status::Fail {
            broken_devices.insert(device);
        }
        report.push(WindowSum, Some(device), Some(index), Some(shard), status, detail);
    }

    // records the fog never emitted
    for shard in cloud.shards() {
        for rec in shard.records() {
            if ledger.window(&rec.device, rec.window.index).is_none() {
                report.push(
                    GatherCompleteness,
                    Some(rec.device),
                    Some(rec.window.index),
                    Some(shard.shard_id()),
                    Status::Fail,
                    "record not in ledger",
                );
                broken_devices.insert(rec.device);
                gather_failed = true;
            }
        }
    }

    for device in ledger.devices() {
        let device = *device;
        if broken_devices.contains(&device) {
            report.push(GrandTotal, Some(device), None, None, Status::Skipped, "window checks failed");
            continue;
        }
        let expected = ledger.total(&device).unwrap_or(0);
        let outcome = cloud
            .aggregate_range(&device, WindowRange::All)
            .map_err(|e| e.to_string())
            .and_then(|c| {
                let kp = keyring.key_pair(&device).ok_or_else(|| "no owner key".to_owned())?;
                report.decryptions += 1;
                kp.private.decrypt_signed(&c).map_err(|e| e.to_string())
            });
        match outcome {
            Ok(total) if total == expected => report.push(GrandTotal, Some(device), None, None, Status::Pass, ""),
            Ok(total) => report.push(
                GrandTotal,
                Some(device),
                None,
                None,
                Status::Fail,
                format!("decrypted {total}, ledger {expected}"),
            ),
            Err(e) => report.push(GrandTotal, Some(device), None, None, Status::Fail, e),
        }
    }

    if n_shards >= 2 {
        for device in ledger.devices() {
            let windows = ledger.window_indices(device);
            if windows.len() < 2 {
                continue;
            }
            let hoarder = cloud
                .shards()
                .iter()
                .find(|s| windows.iter().all(|&w| s.get(device, w).is_some()));
            match hoarder {
                Some(s) => report.push(
                    Partition,
                    Some(*device),
                    None,
                    Some(s.shard_id()),
                    Status::Fail,
                    format!("shard holds all {} windows", windows.len()),
                ),
                None => report.push(Partition, Some(*device), None, None, Status::Pass, ""),
            }
        }
    }

    if gather_failed {
        report.push(CountAccounting, None, None, None, Status::Skipped, "gather completeness failed");
    } else {
        let stored: u64 = cloud.shards().iter().flat_map(|s| s.records()).map(|r| r.report_count).sum();
        let expected = ledger.report_count();
        if stored == expected {
            report.push(CountAccounting, None, None, None, Status::Pass, "");
        } else {
            report.push(
                CountAccounting,
                None,
                None,
                None,
                Status::Fail,
                format!("stored counts sum to {stored}, ledger has {expected}"),
            );
        }
    }

    report
}

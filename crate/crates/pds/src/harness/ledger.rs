use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{window_of, DeviceIdentity, Reading};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WindowEntry {
    pub sum: i64,
    pub count: u64,
}

/// Plaintext bookkeeping of every reading, filled before encryption. It is
/// the ground truth that stored ciphertexts are checked against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShadowLedger {
    window_width: u64,
    windows: BTreeMap<(DeviceIdentity, u64), WindowEntry>,
    totals: BTreeMap<DeviceIdentity, i64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerFile {
    window_width: u64,
    windows: Vec<WindowRow>,
    totals: Vec<TotalRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowRow {
    dev: DeviceIdentity,
    window: u64,
    sum: i64,
    count: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TotalRow {
    dev: DeviceIdentity,
    total: i64,
}

impl ShadowLedger {
    pub fn new(window_width: u64) -> Self {
        assert!(window_width > 0);
        ShadowLedger { window_width, windows: BTreeMap::new(), totals: BTreeMap::new() }
    }

    pub fn record(&mut self, reading: &Reading) {
        let w = window_of(reading.timestamp, self.window_width).expect("width checked at construction");
        let entry = self.windows.entry((reading.device, w.index)).or_default();
        entry.sum += reading.value;
        entry.count += 1;
        *self.totals.entry(reading.device).or_default() += reading.value;
    }

    /// Folds another ledger (for disjoint devices) into this one.
    pub fn merge(&mut self, other: ShadowLedger) {
        assert_eq!(self.window_width, other.window_width);
        for (k, v) in other.windows {
            let e = self.windows.entry(k).or_default();
            e.sum += v.sum;
            e.count += v.count;
        }
        for (d, t) in other.totals {
            *self.totals.entry(d).or_default() += t;
        }
    }

    pub fn window_width(&self) -> u64 {
        self.window_width
    }

    pub fn window(&self, device: &DeviceIdentity, index: u64) -> Option<WindowEntry> {
        self.windows.get(&(*device, index)).copied()
    }

    pub fn windows(&self) -> impl Iterator<Item = (DeviceIdentity, u64, WindowEntry)> + '_ {
        self.windows.iter().map(|(&(d, i), &e)| (d, i, e))
    }

    pub fn window_indices(&self, device: &DeviceIdentity) -> Vec<u64> {
        self.windows.range((*device, 0)..=(*device, u64::MAX)).map(|(&(_, i), _)| i).collect()
    }

    pub fn total(&self, device: &DeviceIdentity) -> Option<i64> {
        self.totals.get(device).copied()
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceIdentity> {
        self.totals.keys()
    }

    pub fn report_count(&self) -> u64 {
        self.windows.values().map(|e| e.count).sum()
    }

    pub fn to_json(&self) -> String {
        let file = LedgerFile {
            window_width: self.window_width,
            windows: self
                .windows
                .iter()
                .map(|(&(dev, window), e)| WindowRow { dev, window, sum: e.sum, count: e.count })
                .collect(),
            totals: self.totals.iter().map(|(&dev, &total)| TotalRow { dev, total }).collect(),
        };
        serde_json::to_string_pretty(&file).expect("ledger serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: LedgerFile = serde_json::from_str(text)?;
        if file.window_width == 0 {
            return Err(serde::de::Error::custom("window_width must be positive"));
        }
        Ok(ShadowLedger {
            window_width: file.window_width,
            windows: file.windows.into_iter().map(|r| ((r.dev, r.window), WindowEntry { sum: r.sum, count: r.count })).collect(),
            totals: file.totals.into_iter().map(|r| (r.dev, r.total)).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_per_window_and_total() {
        let d = DeviceIdentity::new(1, 1).unwrap();
        let mut ledger = ShadowLedger::new(2);
        for (ts, v) in [(0, 1), (1, 1), (2, 1), (3, 1)] {
            ledger.record(&Reading { device: d, timestamp: ts, value: v });
        }
        assert_eq!(ledger.window(&d, 0), Some(WindowEntry { sum: 2, count: 2 }));
        assert_eq!(ledger.window(&d, 1), Some(WindowEntry { sum: 2, count: 2 }));
        assert_eq!(ledger.total(&d), Some(4));
        assert_eq!(ledger.window_indices(&d), vec![0, 1]);
        assert_eq!(ledger.report_count(), 4);
        assert_eq!(ShadowLedger::from_json(&ledger.to_json()).unwrap(), ledger);
    }
}

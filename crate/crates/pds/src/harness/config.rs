use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::model::Region;
use crate::paillier::MIN_PRODUCTION_BITS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub device_count: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Uniform,
    /// Every reading equals `min` (which must equal `max`).
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadingModel {
    pub distribution: Distribution,
    pub min: i64,
    pub max: i64,
}

impl ReadingModel {
    pub fn uniform(min: i64, max: i64) -> Self {
        ReadingModel { distribution: Distribution::Uniform, min, max }
    }

    pub fn constant(value: i64) -> Self {
        ReadingModel { distribution: Distribution::Constant, min: value, max: value }
    }

    pub fn max_magnitude(&self) -> u64 {
        self.min.unsigned_abs().max(self.max.unsigned_abs())
    }
}

fn default_shard_count() -> u32 {
    2
}

/// Simulation parameters, loaded from JSON.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub regions: Vec<RegionSpec>,
    pub period_ticks: u64,
    pub window_width: u64,
    pub total_ticks: u64,
    #[serde(default = "default_shard_count")]
    pub shard_count: u32,
    pub key_bits: u64,
    pub seed: u64,
    pub reading_model: ReadingModel,
    /// Drive each region's devices and fog node on its own thread.
    #[serde(default)]
    pub parallel: bool,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: SimConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::ConfigInvalid(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn region_list(&self) -> Vec<Region> {
        self.regions.iter().enumerate().map(|(i, r)| Region::new(i as u32 + 1, r.device_count)).collect()
    }

    pub fn device_count(&self) -> u64 {
        self.regions.iter().map(|r| u64::from(r.device_count)).sum()
    }

    pub fn reports_per_device(&self) -> u64 {
        self.total_ticks / self.period_ticks
    }

    pub fn reports_per_window(&self) -> u64 {
        self.window_width / self.period_ticks
    }

    pub fn windows_per_device(&self) -> u64 {
        self.total_ticks / self.window_width
    }

    pub fn expected_reports(&self) -> u64 {
        self.device_count() * self.reports_per_device()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::ConfigInvalid(msg));
        if self.regions.is_empty() {
            return fail("regions: at least one region required".into());
        }
        if let Some(i) = self.regions.iter().position(|r| r.device_count == 0) {
            return fail(format!("regions[{i}].device_count must be at least 1"));
        }
        if self.period_ticks == 0 {
            return fail("period_ticks must be positive".into());
        }
        if self.window_width == 0 {
            return fail("window_width must be positive".into());
        }
        if self.total_ticks == 0 {
            return fail("total_ticks must be positive".into());
        }
        if !self.window_width.is_multiple_of(self.period_ticks) {
            return fail(format!(
                "window_width ({}) mod period_ticks ({}) must be 0",
                self.window_width, self.period_ticks
            ));
        }
        if !self.total_ticks.is_multiple_of(self.window_width) {
            return fail(format!(
                "total_ticks ({}) mod window_width ({}) must be 0",
                self.total_ticks, self.window_width
            ));
        }
        if self.shard_count == 0 {
            return fail("shard_count must be at least 1".into());
        }
        if self.key_bits < MIN_PRODUCTION_BITS || !self.key_bits.is_multiple_of(2) {
            return fail(format!("key_bits ({}) must be even and at least {MIN_PRODUCTION_BITS}", self.key_bits));
        }
        let m = &self.reading_model;
        if m.min > m.max {
            return fail(format!("reading_model.min ({}) exceeds max ({})", m.min, m.max));
        }
        if m.distribution == Distribution::Constant && m.min != m.max {
            return fail("reading_model: constant distribution requires min == max".into());
        }
        if m.min == i64::MIN {
            return fail("reading_model.min must be greater than i64::MIN".into());
        }

        // n >= 2^(key_bits - 1); signed sums must satisfy 4|sum| < n. The
        // grand total over a device's whole run is the largest sum decoded.
        let n_floor = BigUint::one() << (self.key_bits - 1);
        let max_abs = BigUint::from(m.max_magnitude());
        let window_bound = BigUint::from(self.reports_per_window()) * &max_abs;
        if window_bound.clone() * 4u32 >= n_floor {
            return fail("max reports per window x max |reading| must stay below n/4".into());
        }
        let total_bound = BigUint::from(self.reports_per_device()) * &max_abs;
        if total_bound.clone() * 4u32 >= n_floor {
            return fail("reports per device x max |reading| must stay below n/4".into());
        }
        if total_bound > BigUint::from(i64::MAX as u64) {
            return fail("reports per device x max |reading| must fit in a signed 64-bit total".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SimConfig {
        SimConfig {
            regions: vec![RegionSpec { device_count: 3 }, RegionSpec { device_count: 3 }],
            period_ticks: 1,
            window_width: 5,
            total_ticks: 20,
            shard_count: 2,
            key_bits: 512,
            seed: 7,
            reading_model: ReadingModel::uniform(-10, 10),
            parallel: false,
        }
    }

    fn rejected(cfg: SimConfig, needle: &str) {
        match cfg.validate() {
            Err(HarnessError::ConfigInvalid(msg)) => assert!(msg.contains(needle), "{msg:?} lacks {needle:?}"),
            other => panic!("expected ConfigInvalid({needle}), got {other:?}"),
        }
    }

    #[test]
    fn accepts_reference_config() {
        let cfg = base();
        cfg.validate().unwrap();
        assert_eq!(cfg.expected_reports(), 120);
        assert_eq!(cfg.windows_per_device(), 4);
        assert_eq!(cfg.reports_per_window(), 5);
    }

    #[test]
    fn names_the_violated_constraint() {
        rejected(SimConfig { window_width: 5, period_ticks: 2, total_ticks: 20, ..base() }, "period_ticks");
        rejected(SimConfig { total_ticks: 22, ..base() }, "total_ticks");
        rejected(SimConfig { shard_count: 0, ..base() }, "shard_count");
        rejected(SimConfig { key_bits: 256, ..base() }, "key_bits");
        rejected(SimConfig { regions: vec![], ..base() }, "regions");
        rejected(SimConfig { regions: vec![RegionSpec { device_count: 0 }], ..base() }, "device_count");
        rejected(SimConfig { reading_model: ReadingModel::uniform(3, -3), ..base() }, "min");
        rejected(
            SimConfig { reading_model: ReadingModel { distribution: Distribution::Constant, min: 1, max: 2 }, ..base() },
            "constant",
        );
        rejected(SimConfig { reading_model: ReadingModel::uniform(-10, i64::MAX / 2), ..base() }, "signed 64-bit");
    }

    #[test]
    fn json_shape() {
        let text = r#"{
            "regions": [{"device_count": 1}],
            "period_ticks": 1, "window_width": 2, "total_ticks": 4,
            "key_bits": 512, "seed": 3,
            "reading_model": {"distribution": "constant", "min": 1, "max": 1}
        }"#;
        let cfg = SimConfig::from_json(text).unwrap();
        assert_eq!(cfg.shard_count, 2);
        assert!(!cfg.parallel);
        assert_eq!(cfg.reading_model, ReadingModel::constant(1));
        assert_eq!(SimConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert!(matches!(SimConfig::from_json("{}"), Err(HarnessError::ConfigInvalid(_))));
    }
}

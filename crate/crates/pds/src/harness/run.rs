use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::config::{Distribution, SimConfig};
use super::ledger::ShadowLedger;
use super::HarnessError;
use crate::client::OwnerKeyring;
use crate::cloud::Cloud;
use crate::fog::{FogConfig, FogNode};
use crate::model::{decode_aggregate, decode_report, encode_aggregate, encode_report, AggregateRecord, Reading, Region};
use crate::seed::derive_seed;

/// Operation counts and timings of one run. Timings are informational and
/// excluded from equality.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub reports_emitted: u64,
    pub aggregates_stored: Vec<u64>,
    pub encryptions: u64,
    pub homomorphic_adds: u64,
    pub rerandomizations: u64,
    pub decryptions: u64,
    pub phase_ms: BTreeMap<String, f64>,
}

impl PartialEq for RunMetrics {
    fn eq(&self, other: &Self) -> bool {
        self.reports_emitted == other.reports_emitted
            && self.aggregates_stored == other.aggregates_stored
            && self.encryptions == other.encryptions
            && self.homomorphic_adds == other.homomorphic_adds
            && self.rerandomizations == other.rerandomizations
            && self.decryptions == other.decryptions
    }
}

impl RunMetrics {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}

/// Everything a completed run leaves behind.
#[derive(Debug)]
pub struct SimulationRun {
    pub config: SimConfig,
    pub keyring: OwnerKeyring,
    pub fog_nodes: Vec<FogNode>,
    pub cloud: Cloud,
    pub ledger: ShadowLedger,
    pub metrics: RunMetrics,
}

struct RegionOutcome {
    fog: FogNode,
    ledger: ShadowLedger,
    // (flush tick, shard, record) in emission order
    emissions: Vec<(u64, u32, AggregateRecord)>,
    reports: u64,
    adds: u64,
}

fn draw_reading<R: Rng>(cfg: &SimConfig, rng: &mut R) -> i64 {
    let m = &cfg.reading_model;
    match m.distribution {
        Distribution::Constant => m.min,
        Distribution::Uniform => rng.gen_range(m.min..=m.max),
    }
}

/// Drives one region's devices and fog node over the whole tick range.
/// Readings cross to the fog only as encoded, encrypted report frames.
fn drive_region(cfg: &SimConfig, region: &Region, keyring: &OwnerKeyring) -> Result<RegionOutcome, HarnessError> {
    let fog_config = FogConfig { window_width_ticks: cfg.window_width, shard_count: cfg.shard_count };
    let mut fog = FogNode::new(region.clone(), fog_config, derive_seed(cfg.seed, &format!("fog/{}", region.index)))?;
    let devices: Vec<_> = region.devices().collect();
    let mut streams = Vec::with_capacity(devices.len());
    for d in &devices {
        let key = keyring.public_key(d).ok_or_else(|| HarnessError::Setup(format!("no key for {d}")))?;
        fog.register(*d, key.clone())?;
        streams.push((
            ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, &format!("reading/{d}"))),
            ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, &format!("nonce/{d}"))),
        ));
    }

    let mut ledger = ShadowLedger::new(cfg.window_width);
    let mut emissions = Vec::new();
    let mut reports = 0;
    let mut adds = 0;
    for tick in (0..cfg.total_ticks).step_by(cfg.period_ticks as usize) {
        for (d, (reading_rng, nonce_rng)) in devices.iter().zip(streams.iter_mut()) {
            let reading = Reading { device: *d, timestamp: tick, value: draw_reading(cfg, reading_rng) };
            ledger.record(&reading);
            let report = keyring.produce_report(&reading, nonce_rng)?;
            let frame = encode_report(&report);
            fog.ingest(decode_report(&frame)?)?;
            reports += 1;
        }
        let flush_at = tick + cfg.period_ticks;
        for (shard, rec) in fog.close_window(flush_at)? {
            adds += rec.report_count - 1;
            emissions.push((flush_at, shard, rec));
        }
    }
    Ok(RegionOutcome { fog, ledger, emissions, reports, adds })
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs the whole pipeline in memory.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimulationRun, HarnessError> {
    run(cfg, None)
}

/// Runs the pipeline with shard logs persisted under `dir`.
pub fn run_simulation_in(cfg: &SimConfig, dir: &Path) -> Result<SimulationRun, HarnessError> {
    run(cfg, Some(dir))
}

fn run(cfg: &SimConfig, dir: Option<&Path>) -> Result<SimulationRun, HarnessError> {
    cfg.validate()?;
    let regions = cfg.region_list();
    let mut metrics = RunMetrics::default();

    let t = Instant::now();
    let keyring = OwnerKeyring::generate(regions.iter().flat_map(|r| r.devices()), cfg.key_bits, cfg.seed)?;
    metrics.phase_ms.insert("keygen".into(), elapsed_ms(t));

    let t = Instant::now();
    let outcomes: Vec<RegionOutcome> = if cfg.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> =
                regions.iter().map(|r| s.spawn(|| drive_region(cfg, r, &keyring))).collect();
            handles.into_iter().map(|h| h.join().expect("region worker panicked")).collect::<Result<_, _>>()
        })?
    } else {
        regions.iter().map(|r| drive_region(cfg, r, &keyring)).collect::<Result<_, _>>()?
    };
    metrics.phase_ms.insert("devices_and_fog".into(), elapsed_ms(t));

    let t = Instant::now();
    let directory = keyring.directory();
    let mut cloud = match dir {
        Some(dir) => Cloud::open(dir, cfg.shard_count, directory)?,
        None => Cloud::in_memory(cfg.shard_count, directory)?,
    };
    // Deliver in flush-tick order, regions in index order within a tick.
    let mut deliveries: Vec<(u64, usize, usize, u32, AggregateRecord)> = Vec::new();
    let mut ledger = ShadowLedger::new(cfg.window_width);
    let mut fog_nodes = Vec::with_capacity(outcomes.len());
    for (ri, out) in outcomes.into_iter().enumerate() {
        metrics.reports_emitted += out.reports;
        metrics.encryptions += out.reports;
        metrics.homomorphic_adds += out.adds;
        metrics.rerandomizations += out.emissions.len() as u64;
        for (seq, (tick, shard, rec)) in out.emissions.into_iter().enumerate() {
            deliveries.push((tick, ri, seq, shard, rec));
        }
        ledger.merge(out.ledger);
        fog_nodes.push(out.fog);
    }
    deliveries.sort_by_key(|(tick, ri, seq, _, _)| (*tick, *ri, *seq));
    metrics.aggregates_stored = vec![0; cfg.shard_count as usize];
    for (_, _, _, shard, rec) in deliveries {
        let frame = encode_aggregate(&rec);
        cloud.store(shard, decode_aggregate(&frame)?)?;
        metrics.aggregates_stored[shard as usize] += 1;
    }
    metrics.phase_ms.insert("cloud_store".into(), elapsed_ms(t));

    Ok(SimulationRun { config: cfg.clone(), keyring, fog_nodes, cloud, ledger, metrics })
}

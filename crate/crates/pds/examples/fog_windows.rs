//! A fog node folding encrypted device reports into per-device window
//! aggregates and routing closed windows to cloud shards.
//!
//!     cargo run --example fog_windows

use std::error::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use pds::client::OwnerKeyring;
use pds::fog::{FogConfig, FogNode};
use pds::model::{Reading, Region};

fn main() -> Result<(), Box<dyn Error>> {
    let region = Region::new(1, 2);
    let keyring = OwnerKeyring::generate(region.devices(), 512, 11)?;
    let config = FogConfig { window_width_ticks: 5, shard_count: 2 };
    let mut fog = FogNode::new(region.clone(), config, 99)?;
    for d in region.devices() {
        fog.register(d, keyring.public_key(&d).unwrap().clone())?;
    }

    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for tick in 0..10u64 {
        for (j, device) in region.devices().enumerate() {
            let value = (tick as i64 + 1) * if j == 0 { 1 } else { -2 };
            let report = keyring.produce_report(&Reading { device, timestamp: tick, value }, &mut rng)?;
            fog.ingest(report)?;
        }
        // Windows whose end has passed are closed and handed off.
        for (shard, rec) in fog.close_window(tick + 1)? {
            let kp = keyring.key_pair(&rec.device).unwrap();
            println!(
                "{} closed {} window {} [{}, {}) -> shard {shard}: {} reports, sum {}",
                fog.id(),
                rec.device,
                rec.window.index,
                rec.window.start_tick,
                rec.window.end_tick(),
                rec.report_count,
                kp.private.decrypt_signed(&rec.ciphertext)?,
            );
        }
    }
    println!("open windows left: {}", fog.open_window_count());

    // A report for an already closed window is rejected.
    let d = region.devices().next().unwrap();
    let late = keyring.produce_report(&Reading { device: d, timestamp: 3, value: 1 }, &mut rng)?;
    println!("late report: {}", fog.ingest(late).unwrap_err());
    Ok(())
}

//! A full simulated deployment checked against the plaintext shadow ledger,
//! followed by a deliberate fault to show verification catching it.
//!
//!     cargo run --release --example simulate_and_verify

use std::error::Error;
use std::fs;

use pds::cloud::{log_file_name, scan_log};
use pds::harness::{rundir, verify, ReadingModel, RegionSpec, SimConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let cfg = SimConfig {
        regions: vec![RegionSpec { device_count: 3 }, RegionSpec { device_count: 3 }],
        period_ticks: 1,
        window_width: 5,
        total_ticks: 20,
        shard_count: 2,
        key_bits: 512,
        seed: 7,
        reading_model: ReadingModel::uniform(-10, 10),
        parallel: true,
    };
    let dir = tempfile::tempdir()?;
    let run = rundir::simulate_to_dir(&cfg, dir.path())?;
    println!("metrics: {}", run.metrics.to_line());
    let report = verify(&run.cloud, &run.keyring, &run.ledger);
    println!("clean run: {}", report.summary_line());
    drop(run);

    // Flip one hex digit of a stored ciphertext, then recover from disk.
    let path = dir.path().join(log_file_name(0));
    let mut bytes = fs::read(&path)?;
    let (offset, target) = scan_log(&bytes).records[1].clone();
    let frame = &bytes[offset as usize + 4..];
    let c_field = frame.windows(5).position(|w| w == br#""c":""#).unwrap() + 5;
    let at = offset as usize + 4 + c_field + 40;
    bytes[at] = if bytes[at] == b'5' { b'6' } else { b'5' };
    fs::write(&path, &bytes)?;
    println!("\ncorrupted {} window {} on shard 0", target.device, target.window.index);

    let cloud = rundir::recover_cloud(dir.path())?;
    let keyring = rundir::load_keyring(&dir.path().join(rundir::KEYRING_FILE))?;
    let ledger = rundir::load_ledger(&dir.path().join(rundir::LEDGER_FILE))?;
    let report = verify(&cloud, &keyring, &ledger);
    println!("after fault: {}", report.summary_line());
    for f in report.failures() {
        println!("  {}", serde_json::to_string(f)?);
    }
    Ok(())
}

//! Shards persist to append-only logs; a restarted shard is rebuilt by
//! replaying its log, and a torn tail is reported with its byte offset.
//!
//!     cargo run --example shard_recovery

use std::error::Error;
use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use pds::client::OwnerKeyring;
use pds::cloud::{log_file_name, scan_log, Cloud, CloudShard, QueryRequest};
use pds::model::{window_of, AggregateRecord, DeviceIdentity};

fn main() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let d = DeviceIdentity::new(1, 1)?;
    let keyring = OwnerKeyring::generate([d], 512, 2)?;
    let pk = keyring.public_key(&d).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(4);

    let query = QueryRequest::all(d.id_number(), true);
    let before = {
        let mut cloud = Cloud::open(dir.path(), 2, keyring.directory())?;
        for w in 0..5u64 {
            let rec = AggregateRecord {
                device: d,
                window: window_of(w * 4, 4)?,
                ciphertext: pk.encrypt(&pk.encode_signed(w as i64 * 3)?, &mut rng)?,
                report_count: 4,
            };
            cloud.store((w % 2) as u32, rec)?;
        }
        cloud.query(&query)?
        // cloud dropped here: every shard "crashes"
    };

    let reopened = Cloud::open(dir.path(), 2, keyring.directory())?;
    println!("after restart, query unchanged: {}", reopened.query(&query)? == before);
    let opened = keyring.open_response(&before)?;
    println!("windows {:?}, total {:?}", opened.windows, opened.total);

    // Tear the last frame of shard 0 and try to replay it.
    let path = dir.path().join(log_file_name(0));
    let mut bytes = fs::read(&path)?;
    println!("\n{} is {} bytes, {} frames", path.display(), bytes.len(), scan_log(&bytes).records.len());
    bytes.truncate(bytes.len() - 7);
    fs::write(&path, &bytes)?;
    println!("replay: {}", CloudShard::recover(&path, 0, 2).unwrap_err());
    let partial = scan_log(&bytes);
    println!("intact frames before the tear: {}", partial.records.len());
    Ok(())
}

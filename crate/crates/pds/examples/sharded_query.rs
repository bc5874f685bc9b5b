//! Storing window aggregates across cloud shards and querying them by
//! identity number. The cloud never sees a plaintext or a private key.
//!
//!     cargo run --example sharded_query

use std::error::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use pds::client::OwnerKeyring;
use pds::cloud::{Cloud, QueryRequest, QueryResponse, WindowRange};
use pds::fog::shard_for;
use pds::model::{window_of, AggregateRecord, DeviceIdentity};

fn main() -> Result<(), Box<dyn Error>> {
    let devices = [DeviceIdentity::new(1, 1)?, DeviceIdentity::new(2, 1)?];
    let keyring = OwnerKeyring::generate(devices, 512, 5)?;
    let mut cloud = Cloud::in_memory(3, keyring.directory())?;
    let mut rng = ChaCha20Rng::seed_from_u64(8);

    for d in &devices {
        let pk = keyring.public_key(d).unwrap();
        for w in 0..6u64 {
            let sum = (w as i64 - 2) * i64::from(d.region_index());
            let rec = AggregateRecord {
                device: *d,
                window: window_of(w * 10, 10)?,
                ciphertext: pk.encrypt(&pk.encode_signed(sum)?, &mut rng)?,
                report_count: 10,
            };
            cloud.store(shard_for(w, 3)?, rec)?;
        }
    }
    for s in cloud.shards() {
        println!("shard {} holds {} aggregates", s.shard_id(), s.len());
    }

    // The request and response cross the boundary as wire frames.
    let request = QueryRequest::span("R2-I1", 1, 4, true)?;
    println!("\nrequest:  {}", String::from_utf8_lossy(&request.to_frame()));
    let frame = cloud.handle_query_frame(&request.to_frame())?;
    println!("response: {} bytes of ciphertext", frame.len());
    let opened = keyring.open_response(&QueryResponse::from_frame(&frame)?)?;
    println!("opened:   {}", serde_json::to_string(&opened)?);

    // The combined total is summed shard-side, then folded at the coordinator.
    let d = devices[0];
    let total = cloud.aggregate_range(&d, WindowRange::All)?;
    let kp = keyring.key_pair(&d).unwrap();
    println!("\n{d} grand total: {}", kp.private.decrypt_signed(&total)?);

    println!("unknown device: {}", cloud.query(&QueryRequest::all("R7-I7", false)).unwrap_err());
    Ok(())
}

//! The canonical JSON frames exchanged between device, fog, and cloud, and
//! how malformed or future-version frames are rejected.
//!
//!     cargo run --example wire_frames

use std::error::Error;

use num_bigint::BigUint;

use pds::model::{decode_aggregate, decode_report, encode_aggregate, encode_report, window_of, AggregateRecord, DeviceIdentity, EncryptedReport};
use pds::paillier::KeyPair;

fn main() -> Result<(), Box<dyn Error>> {
    let kp = KeyPair::from_primes(&BigUint::from(5u32), &BigUint::from(7u32))?;
    let device = DeviceIdentity::new(1, 2)?;
    let ciphertext = kp.public.encrypt_with_nonce(&kp.public.plaintext(1u32.into())?, &2u32.into())?;

    let report = EncryptedReport { device, timestamp: 37, ciphertext: ciphertext.clone() };
    let frame = encode_report(&report);
    println!("report:    {}", String::from_utf8_lossy(&frame));
    assert_eq!(decode_report(&frame)?, report);

    let agg = AggregateRecord { device, window: window_of(35, 5)?, ciphertext, report_count: 1 };
    let frame = encode_aggregate(&agg);
    println!("aggregate: {}", String::from_utf8_lossy(&frame));
    assert_eq!(decode_aggregate(&frame)?, agg);

    let bad = [
        br#"{"v":1,"dev":"R1-I2","ts":37,"c":"288""#.to_vec(),
        br#"{"v":2,"dev":"R1-I2","ts":37,"c":"288","kfp":"535fa30d7e25dd8a"}"#.to_vec(),
        br#"{"v":1,"dev":"R1-I2","ts":37,"c":"288","kfp":"535fa30d7e25dd8a","value":1}"#.to_vec(),
        br#"{"v":1,"dev":"R1-I02","ts":37,"c":"288","kfp":"535fa30d7e25dd8a"}"#.to_vec(),
    ];
    for frame in bad {
        println!("rejected:  {}", decode_report(&frame).unwrap_err());
    }
    Ok(())
}

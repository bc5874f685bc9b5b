use std::path::PathBuf;

use num_bigint::BigUint;

use pds::cloud::{scan_log, CloudError, CloudShard};
use pds::model::{decode_report, encode_aggregate, encode_report, window_of, AggregateRecord, DeviceIdentity, EncryptedReport};
use pds::paillier::{Ciphertext, KeyPair};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn toy() -> KeyPair {
    KeyPair::from_primes(&5u32.into(), &7u32.into()).unwrap()
}

fn golden_records() -> Vec<AggregateRecord> {
    let fp = toy().public.fingerprint().clone();
    let dev = DeviceIdentity::new(1, 1).unwrap();
    [(0u64, 648u32, 5u64), (10, 1, 3), (20, 36, 5)]
        .into_iter()
        .map(|(start, c, count)| AggregateRecord {
            device: dev,
            window: window_of(start, 5).unwrap(),
            ciphertext: Ciphertext::from_parts(BigUint::from(c), fp.clone()),
            report_count: count,
        })
        .collect()
}

#[test]
fn report_encoding_matches_golden_bytes() {
    let golden = std::fs::read(fixture("report.golden.json")).unwrap();
    let kp = toy();
    let c = kp.public.encrypt_with_nonce(&kp.public.plaintext(1u32.into()).unwrap(), &2u32.into()).unwrap();
    let report = EncryptedReport { device: DeviceIdentity::new(1, 2).unwrap(), timestamp: 37, ciphertext: c };
    assert_eq!(encode_report(&report), golden);
    let decoded = decode_report(&golden).unwrap();
    assert_eq!(decoded, report);
    assert_eq!(kp.private.decrypt(&decoded.ciphertext).unwrap().value(), &BigUint::from(1u32));
}

#[test]
fn shard_log_matches_golden_bytes() {
    let golden = std::fs::read(fixture("shard-0.golden.log")).unwrap();
    let mut expected = Vec::new();
    for rec in golden_records() {
        let body = encode_aggregate(&rec);
        expected.extend_from_slice(&(body.len() as u32).to_be_bytes());
        expected.extend_from_slice(&body);
    }
    assert_eq!(expected, golden);

    let shard = CloudShard::recover(&fixture("shard-0.golden.log"), 0, 2).unwrap();
    assert_eq!(shard.records().cloned().collect::<Vec<_>>(), golden_records());
}

#[test]
fn truncated_golden_log_is_corrupt_at_last_frame() {
    let golden = std::fs::read(fixture("shard-0.golden.log")).unwrap();
    let last_frame_offset = {
        let first = 4 + u32::from_be_bytes(golden[0..4].try_into().unwrap()) as usize;
        let second = 4 + u32::from_be_bytes(golden[first..first + 4].try_into().unwrap()) as usize;
        (first + second) as u64
    };
    let tmp = tempfile::tempdir().unwrap();
    for cut in [1usize, 10, 50] {
        let path = tmp.path().join(format!("cut-{cut}.log"));
        std::fs::write(&path, &golden[..golden.len() - cut]).unwrap();
        match CloudShard::recover(&path, 0, 2) {
            Err(CloudError::CorruptLog { offset, .. }) => assert_eq!(offset, last_frame_offset),
            other => panic!("expected CorruptLog, got {other:?}"),
        }
        let replay = scan_log(&golden[..golden.len() - cut]);
        let intact: Vec<_> = replay.records.into_iter().map(|(_, r)| r).collect();
        assert_eq!(intact, golden_records()[..2].to_vec());
    }
}

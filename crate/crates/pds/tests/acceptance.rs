//! Acceptance suite: runs every criterion in turn and prints a single
//! `criterion N: PASS|FAIL` line for each. Exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_bigint::{BigUint, RandBigInt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::Value;

use pds::client::{ClientError, OwnerKeyring};
use pds::cloud::{log_file_name, scan_log, CloudShard, QueryRequest, QueryResponse, WindowRange};
use pds::harness::{rundir, run_simulation, verify, CheckKind, ReadingModel, RegionSpec, SimConfig, SimulationRun};
use pds::model::DeviceIdentity;
use pds::paillier::{keygen, KeyPair};

type Outcome = Result<String, String>;

fn report(n: u32, title: &str, limit: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let elapsed = start.elapsed();
    let outcome = match outcome {
        Ok(detail) if elapsed >= limit => Err(format!("{detail}; exceeded {limit:?}")),
        other => other,
    };
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {n}: {tag} {title} ({:.3}s, limit {}s) {detail}", elapsed.as_secs_f64(), limit.as_secs());
    outcome.is_ok()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// The reference end-to-end configuration.
fn reference_config() -> SimConfig {
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

fn reference_run() -> &'static SimulationRun {
    static RUN: OnceLock<SimulationRun> = OnceLock::new();
    RUN.get_or_init(|| run_simulation(&reference_config()).expect("reference run"))
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn criterion_1_small_ring_exhaustive() -> bool {
    report(1, "exhaustive Paillier round trip, n = 35", Duration::from_secs(1), || {
        let kp = KeyPair::from_primes(&5u32.into(), &7u32.into()).map_err(|e| e.to_string())?;
        let mut cases = 0;
        for m in 0..35u64 {
            for r in (1..35u64).filter(|&r| gcd(r, 35) == 1) {
                let pt = kp.public.plaintext(m.into()).map_err(|e| e.to_string())?;
                let c = kp.public.encrypt_with_nonce(&pt, &r.into()).map_err(|e| e.to_string())?;
                let oracle = pow_mod(36, m, 1225) * pow_mod(r, 35, 1225) % 1225;
                ensure(c.value() == &BigUint::from(oracle), || format!("Enc({m}; r={r}) != {oracle}"))?;
                let back = kp.private.decrypt(&c).map_err(|e| e.to_string())?;
                ensure(back.value() == &BigUint::from(m), || format!("Dec(Enc({m}; r={r})) = {}", back.value()))?;
                cases += 1;
            }
        }
        ensure(cases == 35 * 24, || format!("{cases} cases"))?;
        Ok(format!("{cases}/{cases} (m, r) pairs"))
    })
}

fn criterion_2_homomorphism_at_512_bits() -> bool {
    report(2, "additive and scalar laws at 512 bits", Duration::from_secs(60), || {
        let kp = keygen(512, 2024).map_err(|e| e.to_string())?;
        let (pk, sk) = (&kp.public, &kp.private);
        let n = pk.n().clone();
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let enc = |m: &BigUint, rng: &mut ChaCha20Rng| pk.encrypt(&pk.plaintext(m.clone()).unwrap(), rng).unwrap();
        let mut adds = 0;
        for _ in 0..1000 {
            let a = rng.gen_biguint_below(&n);
            let b = rng.gen_biguint_below(&n);
            let sum = pk.add(&enc(&a, &mut rng), &enc(&b, &mut rng)).map_err(|e| e.to_string())?;
            let got = sk.decrypt(&sum).map_err(|e| e.to_string())?;
            ensure(got.value() == &((&a + &b) % &n), || format!("add law broke for a={a:x} b={b:x}"))?;
            adds += 1;
        }
        let mut scalars = 0;
        for i in 0..200 {
            let a = rng.gen_biguint_below(&n);
            // mix small multipliers with full-width ones
            let k = if i % 2 == 0 { BigUint::from(rng.gen::<u32>()) } else { rng.gen_biguint_below(&n) };
            let prod = pk.scalar_mul(&enc(&a, &mut rng), &k).map_err(|e| e.to_string())?;
            let got = sk.decrypt(&prod).map_err(|e| e.to_string())?;
            ensure(got.value() == &((&a * &k) % &n), || format!("scalar law broke for a={a:x} k={k:x}"))?;
            scalars += 1;
        }
        Ok(format!("{adds} add pairs, {scalars} scalar pairs exact"))
    })
}

fn criterion_3_end_to_end_oracle_equivalence() -> bool {
    report(3, "decrypted aggregates equal the shadow ledger", Duration::from_secs(120), || {
        // timed on a fresh run rather than the shared one
        let run = run_simulation(&reference_config()).map_err(|e| e.to_string())?;
        let mut pairs = 0;
        for (d, w, entry) in run.ledger.windows() {
            let kp = run.keyring.key_pair(&d).ok_or("missing key")?;
            let rec = run
                .cloud
                .shards()
                .iter()
                .find_map(|s| s.get(&d, w))
                .ok_or_else(|| format!("no stored aggregate for {d} window {w}"))?;
            let got = kp.private.decrypt_signed(&rec.ciphertext).map_err(|e| e.to_string())?;
            ensure(got == entry.sum, || format!("{d} window {w}: decrypted {got}, ledger {}", entry.sum))?;
            pairs += 1;
        }
        ensure(pairs == 24, || format!("{pairs} (device, window) pairs, expected 24"))?;
        let mut devices = 0;
        for d in run.keyring.devices() {
            let kp = run.keyring.key_pair(d).unwrap();
            let all = run.cloud.aggregate_range(d, WindowRange::All).map_err(|e| e.to_string())?;
            let got = kp.private.decrypt_signed(&all).map_err(|e| e.to_string())?;
            let expected = run.ledger.total(d).ok_or("no ledger total")?;
            ensure(got == expected, || format!("{d}: grand total {got}, ledger {expected}"))?;
            devices += 1;
        }
        ensure(devices == 6, || format!("{devices} devices, expected 6"))?;
        let report = verify(&run.cloud, &run.keyring, &run.ledger);
        ensure(report.passed(), || report.to_string())?;
        Ok(format!("{pairs}/24 windows and {devices}/6 grand totals exact"))
    })
}

fn criterion_4_partition() -> bool {
    report(4, "no shard holds a device's complete data", Duration::from_secs(120), || {
        let run = reference_run();
        let mut per_shard: BTreeMap<(DeviceIdentity, u32), usize> = BTreeMap::new();
        for shard in run.cloud.shards() {
            for rec in shard.records() {
                *per_shard.entry((rec.device, shard.shard_id())).or_default() += 1;
                ensure(rec.window.index % 2 == u64::from(shard.shard_id()), || {
                    format!("{} window {} on shard {}", rec.device, rec.window.index, shard.shard_id())
                })?;
            }
        }
        let devices: BTreeSet<_> = run.keyring.devices().copied().collect();
        for d in &devices {
            for s in 0..2 {
                let held = per_shard.get(&(*d, s)).copied().unwrap_or(0);
                ensure(held == 2, || format!("shard {s} holds {held} of {d}'s 4 windows"))?;
            }
        }
        Ok(format!("{} devices x 2 shards, exactly 2 of 4 windows each", devices.len()))
    })
}

const RESPONSE_KEYS: [&str; 5] = ["combined", "dev", "kfp", "records", "v"];
const RECORD_KEYS: [&str; 7] = ["c", "count", "dev", "kfp", "v", "win_start", "win_width"];

fn keys(v: &Value) -> Vec<String> {
    v.as_object().map(|o| o.keys().cloned().collect()).unwrap_or_default()
}

fn criterion_5_query_protocol_contract() -> bool {
    report(5, "ciphertext-only responses, correct and wrong key", Duration::from_secs(120), || {
        let run = reference_run();
        let wrong = OwnerKeyring::generate(run.keyring.devices().copied(), 512, 8).map_err(|e| e.to_string())?;
        let mut checked = 0;
        for d in run.keyring.devices() {
            let frame = run
                .cloud
                .handle_query_frame(&QueryRequest::all(d.id_number(), true).to_frame())
                .map_err(|e| e.to_string())?;
            let json: Value = serde_json::from_slice(&frame).map_err(|e| e.to_string())?;
            let mut top = keys(&json);
            top.sort();
            ensure(top == RESPONSE_KEYS, || format!("response fields {top:?}"))?;
            for rec in json["records"].as_array().ok_or("records not an array")? {
                let mut k = keys(rec);
                k.sort();
                ensure(k == RECORD_KEYS, || format!("record fields {k:?}"))?;
            }

            let resp = QueryResponse::from_frame(&frame).map_err(|e| e.to_string())?;
            let opened = run.keyring.open_response(&resp).map_err(|e| e.to_string())?;
            let expected: Vec<(u64, i64)> =
                run.ledger.window_indices(d).into_iter().map(|w| (w, run.ledger.window(d, w).unwrap().sum)).collect();
            ensure(opened.windows == expected, || format!("{d}: opened {:?}, ledger {expected:?}", opened.windows))?;
            ensure(opened.total == run.ledger.total(d), || format!("{d}: combined total mismatch"))?;

            match wrong.open_response(&resp) {
                Err(ClientError::KeyMismatch(dev)) if dev == *d => {}
                other => return Err(format!("{d}: wrong key gave {other:?}")),
            }
            checked += 1;
        }
        Ok(format!("{checked} devices: schema clean, exact sums, KeyMismatch on wrong key"))
    })
}

fn criterion_6_determinism_and_durability() -> bool {
    report(6, "reproducible ledger, shard restart from logs", Duration::from_secs(120), || {
        let cfg = reference_config();
        let again = run_simulation(&cfg).map_err(|e| e.to_string())?;
        let first = reference_run();
        ensure(again.ledger == first.ledger, || "re-run produced a different ledger".into())?;
        ensure(again.metrics == first.metrics, || "re-run produced different counters".into())?;

        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut run = rundir::simulate_to_dir(&cfg, tmp.path()).map_err(|e| e.to_string())?;
        ensure(run.ledger == first.ledger, || "persisted run produced a different ledger".into())?;
        let baseline = verify(&run.cloud, &run.keyring, &run.ledger);
        ensure(baseline.passed(), || baseline.to_string())?;
        let queries: Vec<QueryRequest> = run.keyring.devices().map(|d| QueryRequest::all(d.id_number(), true)).collect();
        let answers: Vec<_> = queries.iter().map(|q| run.cloud.query(q).unwrap()).collect();

        for id in 0..cfg.shard_count {
            let path = tmp.path().join(log_file_name(id));
            let recovered = CloudShard::recover(&path, id, cfg.shard_count).map_err(|e| e.to_string())?;
            // dropping the live shard closes its log handle
            drop(run.cloud.replace_shard(recovered).map_err(|e| e.to_string())?);
            for (q, a) in queries.iter().zip(&answers) {
                let got = run.cloud.query(q).map_err(|e| e.to_string())?;
                ensure(&got == a, || format!("query for {} changed after restarting shard {id}", q.id_number))?;
            }
            let after = verify(&run.cloud, &run.keyring, &run.ledger);
            ensure(after == baseline, || format!("verification changed after restarting shard {id}:\n{after}"))?;
        }

        let cold = rundir::recover_cloud(tmp.path()).map_err(|e| e.to_string())?;
        let keyring = rundir::load_keyring(&tmp.path().join(rundir::KEYRING_FILE)).map_err(|e| e.to_string())?;
        let ledger = rundir::load_ledger(&tmp.path().join(rundir::LEDGER_FILE)).map_err(|e| e.to_string())?;
        let cold_report = verify(&cold, &keyring, &ledger);
        ensure(cold_report == baseline, || format!("cold recovery changed verification:\n{cold_report}"))?;
        Ok(format!("ledger identical; {} shards restarted, {} checks unchanged", cfg.shard_count, baseline.checks.len()))
    })
}

fn criterion_7_fault_sensitivity() -> bool {
    report(7, "one corrupted byte gives one localized failure", Duration::from_secs(120), || {
        let cfg = reference_config();
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        drop(rundir::simulate_to_dir(&cfg, tmp.path()).map_err(|e| e.to_string())?);

        let log_path = tmp.path().join(log_file_name(1));
        let mut bytes = fs::read(&log_path).map_err(|e| e.to_string())?;
        let (offset, target) = scan_log(&bytes).records.get(3).cloned().ok_or("shard log too short")?;
        let offset = offset as usize;
        let len = u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize;
        let body = std::str::from_utf8(&bytes[offset + 4..offset + 4 + len]).map_err(|e| e.to_string())?;
        let c_start = body.find("\"c\":\"").ok_or("no ciphertext field")? + 5;
        let pos = offset + 4 + c_start + 60;
        let original = bytes[pos];
        ensure(original.is_ascii_hexdigit(), || "target byte is not a ciphertext digit".into())?;
        bytes[pos] = if original == b'a' { b'b' } else { b'a' };
        fs::write(&log_path, &bytes).map_err(|e| e.to_string())?;

        let cloud = rundir::recover_cloud(tmp.path()).map_err(|e| e.to_string())?;
        let keyring = rundir::load_keyring(&tmp.path().join(rundir::KEYRING_FILE)).map_err(|e| e.to_string())?;
        let ledger = rundir::load_ledger(&tmp.path().join(rundir::LEDGER_FILE)).map_err(|e| e.to_string())?;
        let report = verify(&cloud, &keyring, &ledger);
        let failures: Vec<_> = report.failures().collect();
        ensure(failures.len() == 1, || format!("{} failures:\n{report}", failures.len()))?;
        let f = failures[0];
        ensure(f.kind == CheckKind::WindowSum, || format!("failure kind {:?}", f.kind))?;
        ensure(f.device == Some(target.device) && f.window == Some(target.window.index), || {
            format!("failure at {:?}/{:?}, corrupted {}/{}", f.device, f.window, target.device, target.window.index)
        })?;
        Ok(format!("byte {pos} of shard-1.log -> single WindowSum failure at {} window {}", target.device, target.window.index))
    })
}

fn main() {
    let results = [
        criterion_1_small_ring_exhaustive(),
        criterion_2_homomorphism_at_512_bits(),
        criterion_3_end_to_end_oracle_equivalence(),
        criterion_4_partition(),
        criterion_5_query_protocol_contract(),
        criterion_6_determinism_and_durability(),
        criterion_7_fault_sensitivity(),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

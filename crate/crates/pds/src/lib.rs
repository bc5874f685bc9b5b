//! Private data storage for IoT telemetry.
//!
//! Devices encrypt readings under their owner's Paillier key, fog nodes fold
//! the ciphertexts per device and time window, and sharded outsourced clouds
//! store and further aggregate them without ever holding a private key. Only
//! the owner can open a query response.
//!
//! | module | role |
//! |---|---|
//! | [`paillier`] | key generation, encryption, homomorphic operations |
//! | [`model`] | identities, readings, windows, wire frames |
//! | [`fog`] | per-region windowed aggregation and shard routing |
//! | [`cloud`] | shard storage, append-only logs, identity queries |
//! | [`client`] | owner keyring, report encryption, response opening |
//! | [`harness`] | deterministic simulation and verification |

pub mod client;
pub mod cloud;
pub mod fog;
pub mod harness;
pub mod model;
pub mod paillier;
pub mod seed;

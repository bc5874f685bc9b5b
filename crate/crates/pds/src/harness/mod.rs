//! Deterministic end-to-end simulation.
//!
//! Spins up regions, devices, fog nodes and cloud shards in-process, records
//! every plaintext reading in a [`ShadowLedger`], and checks the stored
//! ciphertexts against it with [`verify`]. Every hop goes through the wire
//! codec, so the byte formats are exercised exactly as they would be on a
//! network.

mod config;
mod ledger;
pub mod rundir;
mod run;
mod verify;

use thiserror::Error;

pub use config::{Distribution, ReadingModel, RegionSpec, SimConfig};
pub use ledger::{ShadowLedger, WindowEntry};
pub use run::{run_simulation, run_simulation_in, RunMetrics, SimulationRun};
pub use verify::{verify, CheckKind, CheckOutcome, Status, Tally, VerificationReport};

use crate::client::ClientError;
use crate::cloud::CloudError;
use crate::fog::FogError;
use crate::model::WireError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Fog(#[from] FogError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("run directory: {0}")]
    Io(#[from] std::io::Error),
    #[error("run directory file: {0}")]
    Format(#[from] serde_json::Error),
}

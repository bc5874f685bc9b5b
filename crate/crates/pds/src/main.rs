//! `pds` command-line driver.
//!
//! Exit codes: 0 success, 1 verification failures, 2 usage or config error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use pds::client::OwnerKeyring;
use pds::cloud::QueryRequest;
use pds::harness::{rundir, verify, SimConfig};
use pds::model::{DeviceIdentity, Region};
use pds::paillier::MIN_PRODUCTION_BITS;

#[derive(Parser)]
#[command(name = "pds", about = "Private data storage for IoT telemetry", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an owner keyring with one Paillier key pair per device.
    Keygen {
        #[arg(long)]
        bits: u64,
        #[arg(long)]
        seed: u64,
        /// Comma-separated device counts per region, e.g. `3,3`.
        #[arg(long)]
        devices: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a simulation and persist it to a run directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query the cloud by identity number and open the response with the owner keyring.
    Query {
        #[arg(long)]
        rundir: PathBuf,
        #[arg(long)]
        device: String,
        #[arg(long, requires = "to")]
        from: Option<u64>,
        #[arg(long, requires = "from")]
        to: Option<u64>,
        #[arg(long)]
        combine: bool,
        #[arg(long)]
        keyring: PathBuf,
    },
    /// Check every stored aggregate against the plaintext ledger.
    Verify {
        #[arg(long)]
        rundir: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        /// Defaults to `<rundir>/keyring.json`.
        #[arg(long)]
        keyring: Option<PathBuf>,
    },
}

fn parse_device_spec(spec: &str) -> Result<Vec<DeviceIdentity>> {
    let mut devices = Vec::new();
    for (i, part) in spec.split(',').enumerate() {
        let count: u32 = part.trim().parse().with_context(|| format!("bad device count {part:?}"))?;
        if count == 0 {
            bail!("region {} has zero devices", i + 1);
        }
        devices.extend(Region::new(i as u32 + 1, count).devices());
    }
    Ok(devices)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Keygen { bits, seed, devices, out } => {
            if bits < MIN_PRODUCTION_BITS {
                bail!("--bits must be at least {MIN_PRODUCTION_BITS}");
            }
            let keyring = OwnerKeyring::generate(parse_device_spec(&devices)?, bits, seed)?;
            keyring.write_to(&out)?;
            println!("{}", serde_json::json!({ "devices": keyring.len(), "bits": bits, "out": out }));
            Ok(true)
        }
        Command::Simulate { config, out } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = SimConfig::from_json(&text)?;
            let run = rundir::simulate_to_dir(&cfg, &out)?;
            println!("{}", run.metrics.to_line());
            Ok(true)
        }
        Command::Query { rundir: dir, device, from, to, combine, keyring } => {
            let request = match (from, to) {
                (Some(from), Some(to)) => QueryRequest::span(device, from, to, combine)?,
                _ => QueryRequest::all(device, combine),
            };
            let cloud = rundir::recover_cloud(&dir)?;
            let keyring = rundir::load_keyring(&keyring)?;
            // request and response travel as wire frames
            let response_frame = cloud.handle_query_frame(&request.to_frame())?;
            let response = pds::cloud::QueryResponse::from_frame(&response_frame)?;
            let opened = keyring.open_response(&response)?;
            println!("{}", serde_json::to_string(&opened)?);
            Ok(true)
        }
        Command::Verify { rundir: dir, ledger, keyring } => {
            let cloud = rundir::recover_cloud(&dir)?;
            let ledger = rundir::load_ledger(&ledger)?;
            let keyring = rundir::load_keyring(&keyring.unwrap_or_else(|| dir.join(rundir::KEYRING_FILE)))?;
            let report = verify(&cloud, &keyring, &ledger);
            for c in report.failures() {
                eprintln!("{}", serde_json::to_string(c)?);
            }
            println!("{}", report.summary_line());
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

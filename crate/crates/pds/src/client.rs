//! Device-owner side: key custody, report encryption and opening of query
//! responses. This is the only place private keys live.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rand::{CryptoRng, Rng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{DeviceDirectory, QueryResponse};
use crate::model::{DeviceIdentity, EncryptedReport, Reading};
use crate::paillier::{self, KeyPair, PaillierError, PrivateKey, PublicKey};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("device {0} has no key in this keyring")]
    UnknownDevice(DeviceIdentity),
    #[error("response for {0} does not match the keyring entry")]
    KeyMismatch(DeviceIdentity),
    #[error("reading out of range for the device key")]
    ValueOutOfRange,
    #[error("malformed ciphertext in response: {0}")]
    MalformedCiphertext(PaillierError),
    #[error(transparent)]
    Crypto(PaillierError),
    #[error("keyring file: {0}")]
    Io(#[from] io::Error),
    #[error("keyring format: {0}")]
    Format(#[from] serde_json::Error),
}

impl From<PaillierError> for ClientError {
    fn from(e: PaillierError) -> Self {
        match e {
            PaillierError::ValueOutOfRange => ClientError::ValueOutOfRange,
            e @ PaillierError::MalformedCiphertext(_) => ClientError::MalformedCiphertext(e),
            e => ClientError::Crypto(e),
        }
    }
}

/// Per-device key pairs held by the data owner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OwnerKeyring {
    keys: BTreeMap<DeviceIdentity, KeyPair>,
    origin_seed: Option<u64>,
}

/// Decrypted view of a [`QueryResponse`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OpenedResponse {
    pub device: DeviceIdentity,
    pub windows: Vec<(u64, i64)>,
    pub total: Option<i64>,
}

impl OpenedResponse {
    /// Whether the combined total (if any) equals the sum of window sums.
    pub fn is_consistent(&self) -> bool {
        self.total.is_none_or(|t| i128::from(t) == self.windows.iter().map(|&(_, s)| i128::from(s)).sum::<i128>())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyringEntry {
    dev: DeviceIdentity,
    public: PublicKey,
    private: PrivateKey,
}

/// Label under which a device's key seed is derived from the master seed.
pub fn key_seed_label(device: &DeviceIdentity) -> String {
    format!("key/{device}")
}

impl OwnerKeyring {
    /// One fresh key pair per device, each seeded from `master_seed` and the
    /// device identity.
    pub fn generate<I>(devices: I, bits: u64, master_seed: u64) -> Result<Self, ClientError>
    where
        I: IntoIterator<Item = DeviceIdentity>,
    {
        let mut keys = BTreeMap::new();
        for d in devices {
            let kp = paillier::keygen(bits, derive_seed(master_seed, &key_seed_label(&d)))?;
            keys.insert(d, kp);
        }
        Ok(OwnerKeyring { keys, origin_seed: Some(master_seed) })
    }

    pub fn from_pairs<I: IntoIterator<Item = (DeviceIdentity, KeyPair)>>(pairs: I) -> Self {
        OwnerKeyring { keys: pairs.into_iter().collect(), origin_seed: None }
    }

    pub fn origin_seed(&self) -> Option<u64> {
        self.origin_seed
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceIdentity> {
        self.keys.keys()
    }

    pub fn public_key(&self, device: &DeviceIdentity) -> Option<&PublicKey> {
        self.keys.get(device).map(|kp| &kp.public)
    }

    pub fn key_pair(&self, device: &DeviceIdentity) -> Option<&KeyPair> {
        self.keys.get(device)
    }

    /// Public halves only, for provisioning fog nodes and the cloud.
    pub fn directory(&self) -> DeviceDirectory {
        self.keys.iter().map(|(d, kp)| (*d, kp.public.clone())).collect()
    }

    pub fn produce_report<R: Rng + CryptoRng + ?Sized>(
        &self,
        reading: &Reading,
        rng: &mut R,
    ) -> Result<EncryptedReport, ClientError> {
        let kp = self.keys.get(&reading.device).ok_or(ClientError::UnknownDevice(reading.device))?;
        let m = kp.public.encode_signed(reading.value)?;
        let ciphertext = kp.public.encrypt(&m, rng)?;
        Ok(EncryptedReport { device: reading.device, timestamp: reading.timestamp, ciphertext })
    }

    pub fn open_response(&self, resp: &QueryResponse) -> Result<OpenedResponse, ClientError> {
        let kp = self.keys.get(&resp.device).ok_or(ClientError::KeyMismatch(resp.device))?;
        if resp.key_fingerprint != *kp.public.fingerprint() {
            return Err(ClientError::KeyMismatch(resp.device));
        }
        let decrypt = |c| -> Result<i64, ClientError> {
            kp.private.decrypt_signed(c).map_err(|e| match e {
                PaillierError::KeyMismatch { .. } => ClientError::KeyMismatch(resp.device),
                e => e.into(),
            })
        };
        let windows = resp
            .records
            .iter()
            .map(|r| Ok((r.window.index, decrypt(&r.ciphertext)?)))
            .collect::<Result<Vec<_>, ClientError>>()?;
        let total = resp.combined.as_ref().map(decrypt).transpose()?;
        Ok(OpenedResponse { device: resp.device, windows, total })
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<KeyringEntry> = self
            .keys
            .iter()
            .map(|(d, kp)| KeyringEntry { dev: *d, public: kp.public.clone(), private: kp.private.clone() })
            .collect();
        serde_json::to_string_pretty(&entries).expect("keyring serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClientError> {
        let entries: Vec<KeyringEntry> = serde_json::from_str(text)?;
        let mut keys = BTreeMap::new();
        for e in entries {
            let kp = KeyPair::from_halves(e.public, e.private).map_err(|_| ClientError::KeyMismatch(e.dev))?;
            keys.insert(e.dev, kp);
        }
        Ok(OwnerKeyring { keys, origin_seed: None })
    }

    /// Writes the keyring as JSON. On Unix the file is created owner-read/write only.
    pub fn write_to(&self, path: &Path) -> Result<(), ClientError> {
        let mut opts = fs::OpenOptions::new();
        opts.write(true).create(true).truncate(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        use io::Write;
        let mut f = opts.open(path)?;
        f.write_all(self.to_json().as_bytes())?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self, ClientError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

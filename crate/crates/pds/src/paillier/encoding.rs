//! Canonical text forms for big integers and key fingerprints.
//!
//! Big integers travel as lowercase hexadecimal without leading zeros
//! (`"0"` for zero). Parsing is strict so that equal values always have
//! equal encodings.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::PaillierError;

/// Number of hex characters kept from the SHA-256 digest.
pub const FINGERPRINT_LEN: usize = 16;

pub fn to_hex(v: &BigUint) -> String {
    v.to_str_radix(16)
}

pub fn from_hex(s: &str) -> Result<BigUint, PaillierError> {
    let bad = || PaillierError::InvalidHex(s.to_owned());
    if s.is_empty() || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return Err(bad());
    }
    if s.len() > 1 && s.starts_with('0') {
        return Err(bad());
    }
    BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(bad)
}

/// Short digest identifying a Paillier modulus.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(String);

impl Fingerprint {
    pub fn of_modulus(n: &BigUint) -> Self {
        let digest = Sha256::digest(to_hex(n).as_bytes());
        let mut out = String::with_capacity(FINGERPRINT_LEN);
        for byte in digest.iter().take(FINGERPRINT_LEN / 2) {
            out.push_str(&format!("{byte:02x}"));
        }
        Fingerprint(out)
    }

    pub fn parse(s: &str) -> Result<Self, PaillierError> {
        if s.len() == FINGERPRINT_LEN && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(Fingerprint(s.to_owned()))
        } else {
            Err(PaillierError::InvalidFingerprint(s.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Fingerprint::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = "hex_biguint")]` adapter.
pub mod hex_biguint {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_hex(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_is_lowercase_without_leading_zeros() {
        assert_eq!(to_hex(&BigUint::from(0u32)), "0");
        assert_eq!(to_hex(&BigUint::from(255u32)), "ff");
        assert_eq!(to_hex(&BigUint::from(4096u32)), "1000");
    }

    #[test]
    fn strict_parse_rejects_non_canonical_forms() {
        for s in ["", "0ff", "FF", "0x1", " 1", "g", "00"] {
            assert!(from_hex(s).is_err(), "{s:?} should be rejected");
        }
        assert_eq!(from_hex("0").unwrap(), BigUint::from(0u32));
        assert_eq!(from_hex("1a").unwrap(), BigUint::from(26u32));
    }

    #[test]
    fn fingerprint_is_sha256_prefix_of_hex_modulus() {
        // sha256("23") where 0x23 = 35
        let fp = Fingerprint::of_modulus(&BigUint::from(35u32));
        let digest = Sha256::digest(b"23");
        let expected: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        assert_eq!(fp.as_str(), expected);
        assert_eq!(fp.as_str().len(), FINGERPRINT_LEN);
        assert_eq!(fp, Fingerprint::of_modulus(&BigUint::from(35u32)));
        assert_ne!(fp, Fingerprint::of_modulus(&BigUint::from(33u32)));
    }

    #[test]
    fn fingerprint_parse_checks_shape() {
        assert!(Fingerprint::parse("0123456789abcdef").is_ok());
        assert!(Fingerprint::parse("0123456789ABCDEF").is_err());
        assert!(Fingerprint::parse("0123").is_err());
    }
}

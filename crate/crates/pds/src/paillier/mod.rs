//! Paillier cryptosystem with the `g = n + 1` generator.
//!
//! Public keys can encrypt and combine ciphertexts but never recover a
//! plaintext; decryption lives on [`PrivateKey`] only. Every ciphertext is
//! tagged with the fingerprint of the key it was produced under, and all
//! binary operations refuse to mix ciphertexts from different keys.

mod encoding;
pub mod prime;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{CryptoRng, Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use encoding::{from_hex, hex_biguint, to_hex, Fingerprint, FINGERPRINT_LEN};

/// Smallest key size accepted outside of test fixtures.
pub const MIN_PRODUCTION_BITS: u64 = 512;

/// Prime-pair draws attempted by [`keygen`] before giving up.
pub const MAX_KEYGEN_ATTEMPTS: usize = 1_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaillierError {
    #[error("invalid key bit length {0}: must be even and at least 8")]
    InvalidBitLength(u64),
    #[error("no valid prime pair of {bits} bits found after {attempts} attempts")]
    GenerationFailure { bits: u64, attempts: usize },
    #[error("plaintext out of range [0, n)")]
    PlaintextOutOfRange,
    #[error("nonce must lie in [1, n) and be coprime to n")]
    BadNonce,
    #[error("key mismatch: expected {expected}, found {found}")]
    KeyMismatch { expected: Fingerprint, found: Fingerprint },
    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(&'static str),
    #[error("signed value out of range for this key")]
    ValueOutOfRange,
    #[error("invalid key material: {0}")]
    InvalidKey(&'static str),
    #[error("invalid hex integer {0:?}")]
    InvalidHex(String),
    #[error("invalid fingerprint {0:?}")]
    InvalidFingerprint(String),
}

pub type Result<T, E = PaillierError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    n_squared: BigUint,
    g: BigUint,
    fingerprint: Fingerprint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivateKey {
    lambda: BigUint,
    mu: BigUint,
    public: PublicKey,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
    pub bit_length: u64,
    factors: Option<(BigUint, BigUint)>,
}

/// An element of `Z*_{n^2}` bound to the key it was encrypted under.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    value: BigUint,
    key_fingerprint: Fingerprint,
}

/// A ring element in `[0, n)` together with its signed reading.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plaintext {
    value: BigUint,
    signed_view: BigInt,
}

fn check_key(pk: &PublicKey, c: &Ciphertext) -> Result<()> {
    if c.key_fingerprint != pk.fingerprint {
        return Err(PaillierError::KeyMismatch {
            expected: pk.fingerprint.clone(),
            found: c.key_fingerprint.clone(),
        });
    }
    if c.value.is_zero() || c.value >= pk.n_squared {
        return Err(PaillierError::MalformedCiphertext("value outside [1, n^2)"));
    }
    Ok(())
}

impl PublicKey {
    /// Builds the public half from a modulus. Rejects even or tiny moduli.
    pub fn from_modulus(n: BigUint) -> Result<Self> {
        if n < BigUint::from(15u32) || n.is_even() {
            return Err(PaillierError::InvalidKey("modulus must be odd and at least 15"));
        }
        let n_squared = &n * &n;
        let g = &n + 1u32;
        let fingerprint = Fingerprint::of_modulus(&n);
        Ok(PublicKey { n, n_squared, g, fingerprint })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    /// Wraps a raw ring element. Fails unless `0 <= value < n`.
    pub fn plaintext(&self, value: BigUint) -> Result<Plaintext> {
        if value >= self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        let signed_view = self.signed_view(&value);
        Ok(Plaintext { value, signed_view })
    }

    fn signed_view(&self, value: &BigUint) -> BigInt {
        // value <= n/2  <=>  2*value <= n
        if value * 2u32 <= self.n {
            BigInt::from_biguint(Sign::Plus, value.clone())
        } else {
            BigInt::from_biguint(Sign::Plus, value.clone()) - BigInt::from_biguint(Sign::Plus, self.n.clone())
        }
    }

    /// Maps a signed reading into the ring. Requires `4|v| < n` so that
    /// bounded sums never cross the decode threshold.
    pub fn encode_signed(&self, v: i64) -> Result<Plaintext> {
        let magnitude = BigUint::from(v.unsigned_abs());
        if &magnitude * 4u32 >= self.n {
            return Err(PaillierError::ValueOutOfRange);
        }
        let value = if v >= 0 { magnitude } else { &self.n - magnitude };
        self.plaintext(value)
    }

    /// Inverse of [`encode_signed`](Self::encode_signed), thresholding at `n/2`.
    pub fn decode_signed(&self, m: &Plaintext) -> Result<i64> {
        if m.value >= self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        self.signed_view(&m.value).to_i64().ok_or(PaillierError::ValueOutOfRange)
    }

    /// Checks that `c` was produced under this key and lies in `[1, n^2)`.
    pub fn validate(&self, c: &Ciphertext) -> Result<()> {
        check_key(self, c)
    }

    /// Uniform nonce in `[1, n)` coprime to `n`.
    pub fn random_nonce<R: Rng + CryptoRng + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    fn check_nonce(&self, r: &BigUint) -> Result<()> {
        if r.is_zero() || *r >= self.n || !r.gcd(&self.n).is_one() {
            return Err(PaillierError::BadNonce);
        }
        Ok(())
    }

    pub fn encrypt<R: Rng + CryptoRng + ?Sized>(&self, m: &Plaintext, rng: &mut R) -> Result<Ciphertext> {
        let r = self.random_nonce(rng);
        self.encrypt_with_nonce(m, &r)
    }

    /// Deterministic encryption `(n+1)^m * r^n mod n^2` under a caller-chosen nonce.
    pub fn encrypt_with_nonce(&self, m: &Plaintext, r: &BigUint) -> Result<Ciphertext> {
        if m.value >= self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        self.check_nonce(r)?;
        // (n+1)^m = 1 + m*n (mod n^2)
        let gm = (BigUint::one() + &m.value * &self.n) % &self.n_squared;
        let rn = r.modpow(&self.n, &self.n_squared);
        Ok(Ciphertext {
            value: (gm * rn) % &self.n_squared,
            key_fingerprint: self.fingerprint.clone(),
        })
    }

    /// Homomorphic addition of the underlying plaintexts (mod n).
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        check_key(self, a)?;
        check_key(self, b)?;
        Ok(Ciphertext {
            value: (&a.value * &b.value) % &self.n_squared,
            key_fingerprint: self.fingerprint.clone(),
        })
    }

    /// Homomorphic multiplication of the underlying plaintext by `k`.
    pub fn scalar_mul(&self, a: &Ciphertext, k: &BigUint) -> Result<Ciphertext> {
        check_key(self, a)?;
        Ok(Ciphertext {
            value: a.value.modpow(k, &self.n_squared),
            key_fingerprint: self.fingerprint.clone(),
        })
    }

    /// Multiplies by a fresh encryption of zero.
    pub fn rerandomize<R: Rng + CryptoRng + ?Sized>(&self, a: &Ciphertext, rng: &mut R) -> Result<Ciphertext> {
        let s = self.random_nonce(rng);
        self.rerandomize_with(a, &s)
    }

    pub fn rerandomize_with(&self, a: &Ciphertext, s: &BigUint) -> Result<Ciphertext> {
        check_key(self, a)?;
        self.check_nonce(s)?;
        let sn = s.modpow(&self.n, &self.n_squared);
        Ok(Ciphertext {
            value: (&a.value * sn) % &self.n_squared,
            key_fingerprint: self.fingerprint.clone(),
        })
    }

    /// The encryption of zero with nonce 1, the identity for [`add`](Self::add).
    pub fn zero(&self) -> Ciphertext {
        Ciphertext { value: BigUint::one(), key_fingerprint: self.fingerprint.clone() }
    }
}

impl PrivateKey {
    /// Rebuilds a private key from stored material, checking `lambda * mu = 1 (mod n)`.
    pub fn from_parts(lambda: BigUint, mu: BigUint, n: BigUint) -> Result<Self> {
        let public = PublicKey::from_modulus(n)?;
        if mu.is_zero() || mu >= public.n {
            return Err(PaillierError::InvalidKey("mu must lie in [1, n)"));
        }
        if !((&lambda * &mu) % &public.n).is_one() {
            return Err(PaillierError::InvalidKey("lambda * mu is not 1 mod n"));
        }
        Ok(PrivateKey { lambda, mu, public })
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<Plaintext> {
        let pk = &self.public;
        check_key(pk, c)?;
        let u = c.value.modpow(&self.lambda, &pk.n_squared);
        let (l, rem) = (u - 1u32).div_rem(&pk.n);
        if !rem.is_zero() {
            return Err(PaillierError::MalformedCiphertext("L(c^lambda) is not an exact quotient"));
        }
        pk.plaintext((l * &self.mu) % &pk.n)
    }

    /// Decrypts and decodes the signed view in one step.
    pub fn decrypt_signed(&self, c: &Ciphertext) -> Result<i64> {
        let m = self.decrypt(c)?;
        self.public.decode_signed(&m)
    }
}

impl KeyPair {
    /// Builds a key pair from two explicit primes with no size floor.
    ///
    /// This is the entry point for small-ring test fixtures such as
    /// `p = 5, q = 7`. Primality, distinctness and `gcd(pq, (p-1)(q-1)) = 1`
    /// are still checked.
    pub fn from_primes(p: &BigUint, q: &BigUint) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        if p == q
            || !prime::is_probable_prime(p, prime::MILLER_RABIN_ROUNDS, &mut rng)
            || !prime::is_probable_prime(q, prime::MILLER_RABIN_ROUNDS, &mut rng)
        {
            return Err(PaillierError::InvalidKey("p and q must be distinct primes"));
        }
        Self::assemble(p, q).ok_or(PaillierError::InvalidKey("gcd(pq, (p-1)(q-1)) != 1"))
    }

    fn assemble(p: &BigUint, q: &BigUint) -> Option<Self> {
        let n = p * q;
        let p1 = p - 1u32;
        let q1 = q - 1u32;
        if !n.gcd(&(&p1 * &q1)).is_one() {
            return None;
        }
        let lambda = prime::lcm(&p1, &q1);
        let mu = mod_inverse(&lambda, &n)?;
        let public = PublicKey::from_modulus(n).ok()?;
        let bit_length = public.bits();
        Some(KeyPair {
            private: PrivateKey { lambda, mu, public: public.clone() },
            public,
            bit_length,
            factors: Some((p.clone(), q.clone())),
        })
    }

    /// Joins separately stored halves. The prime factors are not recoverable.
    pub fn from_halves(public: PublicKey, private: PrivateKey) -> Result<Self> {
        if private.public != public {
            return Err(PaillierError::InvalidKey("private key belongs to a different modulus"));
        }
        let bit_length = public.bits();
        Ok(KeyPair { public, private, bit_length, factors: None })
    }

    /// `(p, q)` when this pair was generated locally.
    pub fn factors(&self) -> Option<(&BigUint, &BigUint)> {
        self.factors.as_ref().map(|(p, q)| (p, q))
    }
}

fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from_biguint(Sign::Plus, a % m);
    let m = BigInt::from_biguint(Sign::Plus, m.clone());
    let egcd = a.extended_gcd(&m);
    if !egcd.gcd.is_one() {
        return None;
    }
    egcd.x.mod_floor(&m).to_biguint()
}

/// Deterministic key generation: the same `(bit_length, seed)` always yields
/// the same key pair. `n` has exactly `bit_length` bits.
pub fn keygen(bit_length: u64, seed: u64) -> Result<KeyPair> {
    if bit_length < 8 || !bit_length.is_multiple_of(2) {
        return Err(PaillierError::InvalidBitLength(bit_length));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let half = bit_length / 2;
    let failure = PaillierError::GenerationFailure { bits: bit_length, attempts: MAX_KEYGEN_ATTEMPTS };
    for _ in 0..MAX_KEYGEN_ATTEMPTS {
        let p = prime::random_prime(half, &mut rng).ok_or_else(|| failure.clone())?;
        let q = prime::random_prime(half, &mut rng).ok_or_else(|| failure.clone())?;
        if p == q || (&p * &q).bits() != bit_length {
            continue;
        }
        if let Some(kp) = KeyPair::assemble(&p, &q) {
            return Ok(kp);
        }
    }
    Err(failure)
}

impl Ciphertext {
    /// Reassembles a ciphertext received off the wire. Range checks happen
    /// when it is first used with a key.
    pub fn from_parts(value: BigUint, key_fingerprint: Fingerprint) -> Self {
        Ciphertext { value, key_fingerprint }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn key_fingerprint(&self) -> &Fingerprint {
        &self.key_fingerprint
    }
}

impl Plaintext {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn signed_view(&self) -> &BigInt {
        &self.signed_view
    }
}

// JSON forms: PublicKey {"n","fingerprint"}, PrivateKey {"lambda","mu","n"},
// Ciphertext {"c","kfp"}.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PublicKeyRepr {
    #[serde(with = "hex_biguint")]
    n: BigUint,
    fingerprint: Fingerprint,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrivateKeyRepr {
    #[serde(with = "hex_biguint")]
    lambda: BigUint,
    #[serde(with = "hex_biguint")]
    mu: BigUint,
    #[serde(with = "hex_biguint")]
    n: BigUint,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CiphertextRepr {
    #[serde(with = "hex_biguint")]
    c: BigUint,
    kfp: Fingerprint,
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PublicKeyRepr { n: self.n.clone(), fingerprint: self.fingerprint.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let repr = PublicKeyRepr::deserialize(d)?;
        let pk = PublicKey::from_modulus(repr.n).map_err(D::Error::custom)?;
        if pk.fingerprint != repr.fingerprint {
            return Err(D::Error::custom("fingerprint does not match modulus"));
        }
        Ok(pk)
    }
}

impl Serialize for PrivateKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PrivateKeyRepr { lambda: self.lambda.clone(), mu: self.mu.clone(), n: self.public.n.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PrivateKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let repr = PrivateKeyRepr::deserialize(d)?;
        PrivateKey::from_parts(repr.lambda, repr.mu, repr.n).map_err(D::Error::custom)
    }
}

impl Serialize for Ciphertext {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CiphertextRepr { c: self.value.clone(), kfp: self.key_fingerprint.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ciphertext {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = CiphertextRepr::deserialize(d)?;
        Ok(Ciphertext { value: repr.c, key_fingerprint: repr.kfp })
    }
}

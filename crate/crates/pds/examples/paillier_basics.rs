//! Key generation, encryption, and the homomorphic operations a fog node and
//! cloud rely on.
//!
//!     cargo run --example paillier_basics

use std::error::Error;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use pds::paillier::{keygen, KeyPair};

fn main() -> Result<(), Box<dyn Error>> {
    // A toy key from injected primes makes the arithmetic visible.
    let toy = KeyPair::from_primes(&BigUint::from(5u32), &BigUint::from(7u32))?;
    let c = toy.public.encrypt_with_nonce(&toy.public.plaintext(1u32.into())?, &2u32.into())?;
    println!("toy n=35: Enc(1; r=2) = {}", c.value());
    println!("toy n=35: lambda = {}, mu = {}", toy.private.lambda(), toy.private.mu());
    println!("toy n=35: Dec = {}", toy.private.decrypt(&c)?.value());

    // A production-sized key, derived deterministically from a seed.
    let kp = keygen(512, 7)?;
    let (pk, sk) = (&kp.public, &kp.private);
    println!("\n512-bit key, fingerprint {}", pk.fingerprint());
    let mut rng = ChaCha20Rng::seed_from_u64(1);

    // Readings are signed; negatives wrap into the upper half of Z_n.
    let a = pk.encrypt(&pk.encode_signed(-17)?, &mut rng)?;
    let b = pk.encrypt(&pk.encode_signed(40)?, &mut rng)?;
    println!("Dec(Enc(-17) * Enc(40)) = {}", sk.decrypt_signed(&pk.add(&a, &b)?)?);
    println!("Dec(Enc(40) ^ 3)        = {}", sk.decrypt_signed(&pk.scalar_mul(&b, &3u32.into())?)?);

    // Rerandomizing hides the link between input and output ciphertexts.
    let fresh = pk.rerandomize(&a, &mut rng)?;
    println!("rerandomized differs: {}, still decrypts to {}", fresh != a, sk.decrypt_signed(&fresh)?);

    // Mixing keys is refused rather than silently producing garbage.
    let other = keygen(512, 8)?;
    let foreign = other.public.encrypt(&other.public.encode_signed(1)?, &mut rng)?;
    println!("cross-key add: {}", pk.add(&a, &foreign).unwrap_err());
    Ok(())
}

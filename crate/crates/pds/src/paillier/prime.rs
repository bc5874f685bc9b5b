//! Probabilistic prime generation over arbitrary-precision integers.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

/// Miller-Rabin rounds used for every primality decision.
pub const MILLER_RABIN_ROUNDS: usize = 40;

/// Upper bound on random candidates drawn while searching for one prime.
pub const MAX_PRIME_CANDIDATES: usize = 200_000;

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Miller-Rabin with `rounds` random bases, preceded by trial division.
///
/// Composite inputs are rejected with probability at least `1 - 4^-rounds`;
/// primes are never rejected.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &p in SMALL_PRIMES.iter() {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let one = BigUint::one();
    let n_minus_one = n - &one;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;

    'witness: for _ in 0..rounds {
        // n > 251 here, so [2, n-1) is never empty.
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// Draws a random prime with exactly `bits` bits (top and bottom bit forced).
///
/// Returns `None` when no prime turns up within [`MAX_PRIME_CANDIDATES`] draws.
pub fn random_prime<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> Option<BigUint> {
    debug_assert!(bits >= 2);
    for _ in 0..MAX_PRIME_CANDIDATES {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        if bits > 2 {
            candidate.set_bit(0, true);
        }
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return Some(candidate);
        }
    }
    None
}

/// Least common multiple, used for the Carmichael-style `lambda`.
pub fn lcm(a: &BigUint, b: &BigUint) -> BigUint {
    a.lcm(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn trial_division(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n.is_multiple_of(d) {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn agrees_with_trial_division_below_5000() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for n in 0u64..5000 {
            assert_eq!(
                is_probable_prime(&BigUint::from(n), MILLER_RABIN_ROUNDS, &mut rng),
                trial_division(n),
                "n = {n}"
            );
        }
    }

    #[test]
    fn rejects_carmichael_numbers() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for n in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265] {
            assert!(!is_probable_prime(&BigUint::from(n), MILLER_RABIN_ROUNDS, &mut rng));
        }
    }

    #[test]
    fn accepts_known_large_prime() {
        // 2^127 - 1
        let m127 = (BigUint::one() << 127u32) - 1u32;
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(is_probable_prime(&m127, MILLER_RABIN_ROUNDS, &mut rng));
        assert!(!is_probable_prime(&(&m127 * &m127), MILLER_RABIN_ROUNDS, &mut rng));
    }

    #[test]
    fn random_prime_has_requested_width() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for bits in [4u64, 8, 16, 64, 128] {
            let p = random_prime(bits, &mut rng).unwrap();
            assert_eq!(p.bits(), bits);
        }
    }
}

//! Prime generation and testing: Miller-Rabin, deterministic
//! hash-to-prime, and uniform random primes of a fixed bit length.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use std::sync::OnceLock;

/// Rounds used wherever a primality claim is load-bearing.
pub const MILLER_RABIN_ROUNDS: u32 = 64;

/// Odd primes up to 257, plus 2. Used both as a trial-division filter and
/// as the small-factor screen on group elements.
pub fn small_primes() -> &'static [u64] {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| sieve_up_to(257))
}

fn trial_division_primes() -> &'static [u64] {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| sieve_up_to(997))
}

fn sieve_up_to(limit: u64) -> Vec<u64> {
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for p in 2..=limit {
        if !composite[p] {
            out.push(p as u64);
            let mut q = p * p;
            while q <= limit {
                composite[q] = true;
                q += p;
            }
        }
    }
    out
}

/// Miller-Rabin with `rounds` random bases. Bases are drawn from a stream
/// keyed by the candidate itself, so the test is a pure function.
pub fn is_probable_prime(n: &BigUint, rounds: u32) -> bool {
    if n < &BigUint::from(2u32) {
        return false;
    }
    for &p in trial_division_primes() {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if n.is_multiple_of(&p) {
            return false;
        }
    }

    let one = BigUint::one();
    let two = BigUint::from(2u32);
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    let mut seed_input = b"first/miller-rabin-v1".to_vec();
    seed_input.extend_from_slice(&n.to_bytes_be());
    let seed: [u8; 32] = Sha256::digest(&seed_input).into();
    let mut rng = ChaCha20Rng::from_seed(seed);

    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Deterministically maps bytes to an odd prime of exactly `bits` bits.
///
/// A counter is appended to the input and hashed with SHA-256 (expanded
/// over blocks for widths past 256 bits); the top and bottom bits are
/// forced and the candidate is kept if Miller-Rabin (64 rounds) accepts.
pub fn hash_to_prime(data: &[u8], bits: usize) -> BigUint {
    assert!(bits >= 8, "prime width below 8 bits is meaningless");
    assert!(!data.is_empty(), "hash_to_prime input must be non-empty");
    let n_bytes = bits.div_ceil(8);
    for counter in 0u64.. {
        let mut material = Vec::with_capacity(n_bytes + 32);
        let mut block = 0u32;
        while material.len() < n_bytes {
            let mut hasher = Sha256::new();
            hasher.update(b"first/hash-to-prime-v1");
            hasher.update((data.len() as u64).to_be_bytes());
            hasher.update(data);
            hasher.update(counter.to_be_bytes());
            hasher.update(block.to_be_bytes());
            material.extend_from_slice(&hasher.finalize());
            block += 1;
        }
        material.truncate(n_bytes);

        // Clear excess high bits, then force the top bit (exact width)
        // and the bottom bit (odd).
        let excess = n_bytes * 8 - bits;
        material[0] &= 0xffu8 >> excess;
        material[0] |= 0x80u8 >> excess;
        *material.last_mut().unwrap() |= 1;

        let candidate = BigUint::from_bytes_be(&material);
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS) {
            return candidate;
        }
    }
    unreachable!("counter space exhausted");
}

/// Uniformly samples a prime of exactly `bits` bits from the given RNG.
pub fn random_prime<R: Rng + ?Sized>(rng: &mut R, bits: u64) -> BigUint {
    assert!(bits >= 8);
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS) {
            return candidate;
        }
    }
}

/// True when `x` shares a factor up to 257 with `n`. Such an `x` lies
/// outside the multiplicative group mod `n` and would trivially factor `n`.
pub fn shares_small_factor(x: &BigUint, n: &BigUint) -> bool {
    if x.is_zero() {
        return true;
    }
    for &p in small_primes() {
        let p = BigUint::from(p);
        if x.is_multiple_of(&p) && n.is_multiple_of(&p) {
            return true;
        }
    }
    false
}

//! Verifiable delay function over a group of unknown order.
//!
//! Evaluation squares the input `T` times sequentially; the succinct proof
//! lets anyone check the result with work polynomial in `log T`. The
//! challenge prime is derived non-interactively by hashing the full
//! transcript `(x, y, T, N)` to a prime, and the proof exponent
//! `⌊2^T / ℓ⌋` is computed by streaming long division so that `2^T` is
//! never materialized.
//!
//! All functions are pure; evaluating the same input twice yields bitwise
//! identical proofs.

use crate::encoding::{biguint_dec, Encoder};
use crate::primes;
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Bit width of the Fiat-Shamir challenge prime.
pub const FS_CHALLENGE_BITS: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VdfError {
    #[error("modulus must be odd")]
    EvenModulus,
    #[error("modulus must exceed 3")]
    TinyModulus,
    #[error("difficulty must be below 2^64")]
    DifficultyOverflow,
    #[error("input must lie strictly between 1 and N-1 and avoid small factors of N")]
    InputOutOfRange,
}

/// Public parameters of one delay-function instance: the modulus `N`
/// (established by the federated setup, never generated here), the number
/// of sequential squarings `T`, and the security level in bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VdfParams {
    #[serde(with = "biguint_dec")]
    modulus: BigUint,
    difficulty: u64,
    security_bits: u32,
}

impl VdfParams {
    /// Validates and wraps externally supplied parameters.
    pub fn new(security_bits: u32, difficulty: u128, modulus: BigUint) -> Result<Self, VdfError> {
        if modulus.is_even() {
            return Err(VdfError::EvenModulus);
        }
        if modulus <= BigUint::from(3u32) {
            return Err(VdfError::TinyModulus);
        }
        let difficulty = u64::try_from(difficulty).map_err(|_| VdfError::DifficultyOverflow)?;
        Ok(VdfParams {
            modulus,
            difficulty,
            security_bits,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn difficulty(&self) -> u64 {
        self.difficulty
    }

    pub fn security_bits(&self) -> u32 {
        self.security_bits
    }

    /// Same instance with a different difficulty; used by benchmarks.
    pub fn with_difficulty(&self, difficulty: u64) -> Self {
        VdfParams {
            modulus: self.modulus.clone(),
            difficulty,
            security_bits: self.security_bits,
        }
    }

    /// Canonical bytes signed by verifiers when publishing parameters.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        Encoder::new("first/pp-v1")
            .biguint(&self.modulus)
            .u64(self.difficulty)
            .u32(self.security_bits)
            .finish()
    }
}

/// Evaluation transcript: input, output, proof element, and the
/// Fiat-Shamir challenge prime the proof was built against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VdfProof {
    #[serde(with = "biguint_dec")]
    pub input: BigUint,
    #[serde(with = "biguint_dec")]
    pub output: BigUint,
    #[serde(with = "biguint_dec")]
    pub proof: BigUint,
    #[serde(with = "biguint_dec")]
    pub challenge: BigUint,
}

fn fs_challenge(params: &VdfParams, input: &BigUint, output: &BigUint) -> BigUint {
    let transcript = Encoder::new("first/vdf-fs-v1")
        .biguint(input)
        .biguint(output)
        .u64(params.difficulty)
        .biguint(&params.modulus)
        .finish();
    primes::hash_to_prime(&transcript, FS_CHALLENGE_BITS)
}

fn in_group_range(v: &BigUint, n: &BigUint) -> bool {
    v >= &BigUint::one() && v < n && !primes::shares_small_factor(v, n)
}

/// Sequentially computes `y = x^(2^T) mod N` and the proof
/// `π = x^⌊2^T / ℓ⌋ mod N` in one pass over the exponent bits.
pub fn eval(params: &VdfParams, input: &BigUint) -> Result<VdfProof, VdfError> {
    let n = &params.modulus;
    if input <= &BigUint::one() || input >= n || primes::shares_small_factor(input, n) {
        return Err(VdfError::InputOutOfRange);
    }

    let mut output = input.clone();
    for _ in 0..params.difficulty {
        output = &output * &output % n;
    }

    let challenge = fs_challenge(params, input, &output);

    // Long division of 2^T by ℓ in the exponent: feed the dividend bits
    // (a one followed by T zeros) most significant first, tracking the
    // remainder and folding each quotient bit into π immediately.
    let mut remainder = BigUint::one();
    let mut proof = BigUint::one();
    for _ in 0..params.difficulty {
        remainder <<= 1;
        proof = &proof * &proof % n;
        if remainder >= challenge {
            remainder -= &challenge;
            proof = proof * input % n;
        }
    }
    debug_assert_eq!(
        remainder,
        BigUint::from(2u32).modpow(&BigUint::from(params.difficulty), &challenge)
    );

    Ok(VdfProof {
        input: input.clone(),
        output,
        proof,
        challenge,
    })
}

/// Checks `π^ℓ · x^(2^T mod ℓ) ≡ y (mod N)` after recomputing the
/// challenge from the transcript. Malformed proofs are rejected, never
/// an error. Cost is independent of `T` up to computing `2^T mod ℓ`.
pub fn verify(params: &VdfParams, proof: &VdfProof) -> bool {
    let n = &params.modulus;
    if proof.input <= BigUint::one() || !in_group_range(&proof.input, n) {
        return false;
    }
    if !in_group_range(&proof.output, n) || !in_group_range(&proof.proof, n) {
        return false;
    }
    if proof.challenge.bits() as usize != FS_CHALLENGE_BITS {
        return false;
    }
    if fs_challenge(params, &proof.input, &proof.output) != proof.challenge {
        return false;
    }

    let residue = BigUint::from(2u32).modpow(&BigUint::from(params.difficulty), &proof.challenge);
    let lhs = proof.proof.modpow(&proof.challenge, n) * proof.input.modpow(&residue, n) % n;
    lhs == proof.output
}

/// One timing sample of [`eval`] and [`verify`] at a given difficulty.
#[derive(Debug, Clone, Serialize)]
pub struct BenchPoint {
    pub difficulty: u64,
    pub eval_seconds: f64,
    pub verify_seconds: f64,
}

/// Times eval/verify across a difficulty grid, keeping the fastest of
/// `repeats` runs per point to suppress scheduler noise.
pub fn bench_grid(
    params: &VdfParams,
    difficulties: &[u64],
    input: &BigUint,
    repeats: u32,
) -> Vec<BenchPoint> {
    assert!(repeats >= 1);
    difficulties
        .iter()
        .map(|&t| {
            let p = params.with_difficulty(t);
            let mut eval_best = f64::INFINITY;
            let mut verify_best = f64::INFINITY;
            for _ in 0..repeats {
                let started = Instant::now();
                let proof = eval(&p, input).expect("bench input invalid");
                eval_best = eval_best.min(started.elapsed().as_secs_f64());

                let started = Instant::now();
                assert!(verify(&p, &proof), "bench round trip failed");
                verify_best = verify_best.min(started.elapsed().as_secs_f64());
            }
            BenchPoint {
                difficulty: t,
                eval_seconds: eval_best,
                verify_seconds: verify_best,
            }
        })
        .collect()
}

/// Least-squares line fit returning `(slope, intercept, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::RandBigInt;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn federated_test_modulus() -> BigUint {
        // Sum of three primes, mirroring the federated setup.
        let shares = [1049u64, 1061, 1063];
        for s in shares {
            assert!(primes::is_probable_prime(&BigUint::from(s), 64));
        }
        BigUint::from(shares.iter().sum::<u64>())
    }

    #[test]
    fn setup_accepts_federated_modulus() {
        let n = federated_test_modulus();
        assert_eq!(n, BigUint::from(3173u32));
        let params = VdfParams::new(16, 4, n.clone()).unwrap();
        assert_eq!(params.modulus(), &n);
        assert_eq!(params.difficulty(), 4);
        assert_eq!(params.security_bits(), 16);
    }

    #[test]
    fn setup_accepts_zero_difficulty() {
        let params = VdfParams::new(16, 0, BigUint::from(15u32)).unwrap();
        assert_eq!(params.difficulty(), 0);
    }

    #[test]
    fn setup_rejects_even_modulus() {
        assert_eq!(
            VdfParams::new(16, 4, BigUint::from(16u32)).unwrap_err(),
            VdfError::EvenModulus
        );
    }

    #[test]
    fn setup_rejects_tiny_modulus() {
        assert_eq!(
            VdfParams::new(16, 4, BigUint::from(3u32)).unwrap_err(),
            VdfError::TinyModulus
        );
    }

    #[test]
    fn setup_rejects_difficulty_overflow() {
        assert_eq!(
            VdfParams::new(16, 1u128 << 64, BigUint::from(15u32)).unwrap_err(),
            VdfError::DifficultyOverflow
        );
    }

    #[test]
    fn zero_difficulty_is_identity() {
        let params = VdfParams::new(16, 0, BigUint::from(15u32)).unwrap();
        let proof = eval(&params, &BigUint::from(7u32)).unwrap();
        assert_eq!(proof.output, BigUint::from(7u32));
        assert!(verify(&params, &proof));
    }

    #[test]
    fn eval_matches_repeated_squaring_oracle() {
        let params = VdfParams::new(16, 4, federated_test_modulus()).unwrap();
        let x = BigUint::from(2u32);

        // Oracle 1: four explicit squarings give x^(2^4) = x^16.
        let mut expected = x.clone();
        for _ in 0..4 {
            expected = &expected * &expected % params.modulus();
        }
        // Oracle 2: plain modular exponentiation with exponent 2^4.
        let direct = x.modpow(&(BigUint::one() << 4u32), params.modulus());
        assert_eq!(expected, direct);
        assert_eq!(direct, BigUint::from(65536u32 % 3173));

        let proof = eval(&params, &x).unwrap();
        assert_eq!(proof.output, expected);
        assert!(verify(&params, &proof));
    }

    #[test]
    fn eval_rejects_out_of_range_input() {
        let params = VdfParams::new(16, 4, federated_test_modulus()).unwrap();
        for bad in [
            BigUint::from(0u32),
            BigUint::one(),
            params.modulus().clone(),
        ] {
            assert_eq!(eval(&params, &bad).unwrap_err(), VdfError::InputOutOfRange);
        }
    }

    #[test]
    fn tampered_output_rejected() {
        let params = VdfParams::new(16, 4, federated_test_modulus()).unwrap();
        let mut proof = eval(&params, &BigUint::from(2u32)).unwrap();
        proof.output += 1u32;
        assert!(!verify(&params, &proof));
    }

    #[test]
    fn trivial_proof_element_rejected() {
        // T must exceed the challenge width, else 2^T < ℓ makes the honest
        // quotient zero and π = 1 legitimately. 256 squarings suffice.
        let params = VdfParams::new(16, 256, federated_test_modulus()).unwrap();
        let mut proof = eval(&params, &BigUint::from(2u32)).unwrap();
        assert_ne!(proof.proof, BigUint::one());
        proof.proof = BigUint::one();
        // Oracle: with π = 1 the congruence demands y = x^(2^T mod ℓ),
        // which does not hold for this transcript.
        let residue = BigUint::from(2u32).modpow(&BigUint::from(256u32), &proof.challenge);
        assert_ne!(proof.input.modpow(&residue, params.modulus()), proof.output);
        assert!(!verify(&params, &proof));
    }

    #[test]
    fn eval_is_bitwise_deterministic() {
        let params = VdfParams::new(16, 64, federated_test_modulus()).unwrap();
        let a = eval(&params, &BigUint::from(2u32)).unwrap();
        let b = eval(&params, &BigUint::from(2u32)).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );
    }

    #[test]
    fn hash_to_prime_pairs_distinct() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut a = [0u8; 24];
            rng.fill(&mut a);
            let mut b = a;
            let bit = rng.gen_range(0..192);
            b[bit / 8] ^= 1 << (bit % 8);
            assert_ne!(
                primes::hash_to_prime(&a, FS_CHALLENGE_BITS),
                primes::hash_to_prime(&b, FS_CHALLENGE_BITS)
            );
        }
    }

    #[test]
    fn soundness_probe_small() {
        let params = VdfParams::new(32, 128, federated_test_modulus()).unwrap();
        let honest = eval(&params, &BigUint::from(2u32)).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut mutated = honest.clone();
            let delta = rng.gen_biguint_range(&BigUint::one(), params.modulus());
            match rng.gen_range(0..4) {
                0 => mutated.input = (&mutated.input + &delta) % params.modulus(),
                1 => mutated.output = (&mutated.output + &delta) % params.modulus(),
                2 => mutated.proof = (&mutated.proof + &delta) % params.modulus(),
                _ => mutated.challenge = &mutated.challenge + &delta,
            }
            if mutated == honest {
                continue;
            }
            assert!(!verify(&params, &mutated));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn round_trip_accepts(seed in any::<u64>(), t in 0u64..=4096) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let n = {
                let a = primes::random_prime(&mut rng, 32);
                let b = primes::random_prime(&mut rng, 32);
                let c = primes::random_prime(&mut rng, 32);
                a + b + c
            };
            let params = VdfParams::new(32, t as u128, n).unwrap();
            let x = loop {
                let candidate = rng.gen_biguint_range(&BigUint::from(2u32), params.modulus());
                if !primes::shares_small_factor(&candidate, params.modulus()) {
                    break candidate;
                }
            };
            let proof = eval(&params, &x).unwrap();
            prop_assert!(verify(&params, &proof));
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs: Vec<f64> = (1..=6).map(|v| v as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 0.5).collect();
        let (slope, intercept, r2) = linear_fit(&xs, &ys);
        assert!((slope - 3.0).abs() < 1e-12);
        assert!((intercept - 0.5).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}

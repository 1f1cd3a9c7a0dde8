use first_core::chainsim::Chain;
use first_core::protocol::{Federation, FederationConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn chain() -> Chain {
    Chain::new(1_000_000_000, 15_000_000)
}

pub fn federation_config(verifier_count: u32, difficulty: u64) -> FederationConfig {
    FederationConfig {
        verifier_count,
        security_bits: 64,
        difficulty,
        vdf_seconds_per_step: 0.01,
        t2_seconds: 0.05,
        recommended_tip_pct: 20.0,
        freshness_threshold: 10,
    }
}

pub fn bootstrap(
    verifier_count: u32,
    difficulty: u64,
    seed: u64,
) -> (Chain, Federation, ChaCha20Rng) {
    let mut r = rng(seed);
    let mut chain = chain();
    let federation = Federation::bootstrap(
        &mut chain,
        &federation_config(verifier_count, difficulty),
        &mut r,
    )
    .expect("bootstrap succeeds");
    (chain, federation, r)
}

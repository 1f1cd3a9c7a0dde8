//! Actor state machines for the frontrunning-resistant submission flow.
//!
//! Roles: the dApp creator deploys the contract and picks the difficulty;
//! an odd committee of verifiers federates the delay-function modulus and
//! endorses challenges and proofs; an untrusted coordinator (any committee
//! member) hands out challenge primes and aggregates endorsements; the
//! user hides transaction details behind a digest, serves the delay, and
//! assembles the final transaction.
//!
//! Every actor is a single-threaded state machine exchanging immutable
//! messages; the [`pipeline`] harness drives them either sequentially or
//! from worker threads with identical outcomes.

mod messages;
pub mod pipeline;

pub use messages::{
    bundle_wire_bytes, AcceptEndorsement, ChallengeEndorsement, ChallengeRecord, ChallengeState,
    FirstTransaction, IntentMessage, TxPayload, UserTxIntent,
};

use crate::aggsig::{self, KeyPair, PublicKey, Signature};
use crate::chainsim::Chain;
use crate::encoding::biguint_dec;
use crate::primes;
use crate::vdf::{VdfError, VdfParams};
use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// Rounds of federated parameter generation before giving up.
pub const MAX_SETUP_ROUNDS: u32 = 5;

/// Committee member identity (index into the registered committee).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VerifierId(pub u32);

impl fmt::Display for VerifierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.0)
    }
}

/// 20-byte account identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Address {
        let mut bytes = [0u8; 20];
        rng.fill_bytes(&mut bytes);
        Address(bytes)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl Serialize for Address {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = String::deserialize(d)?;
        let bytes: [u8; 20] = hex::decode(&raw)
            .map_err(D::Error::custom)?
            .try_into()
            .map_err(|_| D::Error::custom("address must be 20 bytes"))?;
        Ok(Address(bytes))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("committee size must be odd, got {got}")]
    EvenVerifierCount { got: u32 },
    #[error("committee needs at least 3 members, got {got}")]
    TooFewVerifiers { got: u32 },
    #[error("parameter generation failed after {rounds} rounds")]
    SetupFailed { rounds: u32 },
    #[error("difficulty decrease requires an empty pending pool ({pending} pending)")]
    PendingPoolNotEmpty { pending: usize },
    #[error("delay budget t1={t1}s must exceed expected pool wait t2={t2}s")]
    InvalidEpochTiming { t1: f64, t2: f64 },
    #[error(transparent)]
    Vdf(#[from] VdfError),
}

/// A committee member's ⊥: the typed reason a request was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("challenge prime was already issued or consumed")]
    ReplayedChallenge,
    #[error("challenge prime was never issued")]
    UnknownChallenge,
    #[error("user signature invalid")]
    BadUserSignature,
    #[error("delay proof rejected")]
    VdfRejected,
    #[error("only {valid} of {total} committee responses were valid")]
    InsufficientMajority { valid: usize, total: usize },
    #[error("aggregate signature invalid")]
    BadAggregate,
    #[error("parameter signatures lack a committee majority")]
    BadParamsSignatures,
}

/// Parameters in force for one epoch. Challenge bookkeeping and the
/// modulus reset at every epoch boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochConfig {
    pub epoch_id: u64,
    pub difficulty: u64,
    #[serde(with = "biguint_dec")]
    pub modulus: BigUint,
    pub security_bits: u32,
    pub recommended_tip_pct: f64,
    pub freshness_threshold: u64,
    pub t1_seconds: f64,
    pub t2_seconds: f64,
}

impl EpochConfig {
    pub fn params(&self) -> VdfParams {
        VdfParams::new(
            self.security_bits,
            self.difficulty as u128,
            self.modulus.clone(),
        )
        .expect("epoch holds validated parameters")
    }
}

/// One committee member: keys, the issued/consumed challenge books, the
/// parameters it currently endorses, and its modulus share.
#[derive(Debug, Clone)]
pub struct VerifierState {
    pub id: VerifierId,
    keypair: KeyPair,
    issued: BTreeSet<BigUint>,
    used: BTreeSet<BigUint>,
    current_params: Option<VdfParams>,
    modulus_share: Option<BigUint>,
}

impl VerifierState {
    fn new(id: VerifierId, keypair: KeyPair) -> Self {
        VerifierState {
            id,
            keypair,
            issued: BTreeSet::new(),
            used: BTreeSet::new(),
            current_params: None,
            modulus_share: None,
        }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keypair.public()
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn params(&self) -> Option<&VdfParams> {
        self.current_params.as_ref()
    }

    pub fn modulus_share(&self) -> Option<&BigUint> {
        self.modulus_share.as_ref()
    }

    pub fn issued_count(&self) -> usize {
        self.issued.len()
    }

    pub fn used_count(&self) -> usize {
        self.used.len()
    }

    pub fn has_issued(&self, ell: &BigUint) -> bool {
        self.issued.contains(ell)
    }

    pub fn has_used(&self, ell: &BigUint) -> bool {
        self.used.contains(ell)
    }

    /// The book invariant: consumed challenges are a subset of issued ones.
    pub fn books_consistent(&self) -> bool {
        self.used.is_subset(&self.issued)
    }

    fn reset_for_epoch(&mut self, share: BigUint, params: VdfParams) {
        self.issued.clear();
        self.used.clear();
        self.modulus_share = Some(share);
        self.current_params = Some(params);
    }
}

/// What the dApp creator registers on-chain: the contract identity, the
/// committee's verification keys, and the freshness window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractDescriptor {
    pub address: Address,
    pub verifier_keys: Vec<PublicKey>,
    pub freshness_threshold: u64,
}

/// Deploys the contract and has every committee member generate keys.
/// The committee must be odd so the federated modulus sums to an odd
/// number, and at least 3 so a majority is meaningful.
pub fn system_setup<R: Rng + ?Sized>(
    chain: &mut Chain,
    verifier_count: u32,
    freshness_threshold: u64,
    rng: &mut R,
) -> Result<(ContractDescriptor, Vec<VerifierState>), ProtocolError> {
    if verifier_count.is_multiple_of(2) {
        return Err(ProtocolError::EvenVerifierCount {
            got: verifier_count,
        });
    }
    if verifier_count < 3 {
        return Err(ProtocolError::TooFewVerifiers {
            got: verifier_count,
        });
    }
    let verifiers: Vec<VerifierState> = (0..verifier_count)
        .map(|i| VerifierState::new(VerifierId(i), aggsig::keygen(rng)))
        .collect();
    let descriptor = ContractDescriptor {
        address: Address::random(rng),
        verifier_keys: verifiers.iter().map(|v| v.public_key()).collect(),
        freshness_threshold,
    };
    chain.deploy(descriptor.clone());
    Ok((descriptor, verifiers))
}

/// Result of one federated parameter generation.
#[derive(Debug, Clone)]
pub struct ParamGenOutcome {
    pub params: VdfParams,
    pub signatures: Vec<Signature>,
    pub restarts: u32,
}

/// Federated parameter generation: every member contributes a prime share,
/// everyone validates everyone's share, and the modulus is the share sum.
/// Any non-prime share restarts the round with fresh shares.
pub fn param_gen<R: Rng + ?Sized>(
    verifiers: &mut [VerifierState],
    difficulty: u64,
    security_bits: u32,
    rng: &mut R,
) -> Result<ParamGenOutcome, ProtocolError> {
    param_gen_with_shares(verifiers, difficulty, security_bits, rng, |_, _, share| {
        share
    })
}

/// [`param_gen`] with a share interceptor, letting tests model a member
/// that broadcasts a bad share. The interceptor sees (round, member index,
/// honestly sampled share) and returns the share actually broadcast.
pub fn param_gen_with_shares<R, F>(
    verifiers: &mut [VerifierState],
    difficulty: u64,
    security_bits: u32,
    rng: &mut R,
    mut intercept: F,
) -> Result<ParamGenOutcome, ProtocolError>
where
    R: Rng + ?Sized,
    F: FnMut(u32, usize, BigUint) -> BigUint,
{
    let share_bits = u64::from(security_bits) * 2;
    for round in 0..MAX_SETUP_ROUNDS {
        let shares: Vec<BigUint> = (0..verifiers.len())
            .map(|i| intercept(round, i, primes::random_prime(rng, share_bits)))
            .collect();

        // Every member checks every broadcast share.
        let all_prime = shares
            .iter()
            .all(|s| primes::is_probable_prime(s, primes::MILLER_RABIN_ROUNDS));
        if !all_prime {
            continue;
        }

        let modulus: BigUint = shares.iter().sum();
        let params = VdfParams::new(security_bits, difficulty as u128, modulus)?;
        let pp_bytes = params.canonical_bytes();
        let signatures: Vec<Signature> = verifiers
            .iter()
            .map(|v| aggsig::sign(&v.keypair, &pp_bytes))
            .collect();
        for (v, share) in verifiers.iter_mut().zip(shares) {
            v.reset_for_epoch(share, params.clone());
        }
        return Ok(ParamGenOutcome {
            params,
            signatures,
            restarts: round,
        });
    }
    Err(ProtocolError::SetupFailed {
        rounds: MAX_SETUP_ROUNDS,
    })
}

/// Standing configuration of a committee deployment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FederationConfig {
    pub verifier_count: u32,
    pub security_bits: u32,
    pub difficulty: u64,
    pub vdf_seconds_per_step: f64,
    pub t2_seconds: f64,
    pub recommended_tip_pct: f64,
    pub freshness_threshold: u64,
}

/// A deployed committee with its current epoch parameters.
#[derive(Debug, Clone)]
pub struct Federation {
    pub verifiers: Vec<VerifierState>,
    pub contract: ContractDescriptor,
    epoch: EpochConfig,
    pp_signatures: Vec<Signature>,
    vdf_seconds_per_step: f64,
}

impl Federation {
    /// Runs system setup and the first parameter generation.
    pub fn bootstrap<R: Rng + ?Sized>(
        chain: &mut Chain,
        config: &FederationConfig,
        rng: &mut R,
    ) -> Result<Federation, ProtocolError> {
        let (contract, mut verifiers) = system_setup(
            chain,
            config.verifier_count,
            config.freshness_threshold,
            rng,
        )?;
        let outcome = param_gen(&mut verifiers, config.difficulty, config.security_bits, rng)?;
        let epoch = build_epoch(1, config, &outcome)?;
        Ok(Federation {
            verifiers,
            contract,
            epoch,
            pp_signatures: outcome.signatures,
            vdf_seconds_per_step: config.vdf_seconds_per_step,
        })
    }

    pub fn epoch(&self) -> &EpochConfig {
        &self.epoch
    }

    pub fn params(&self) -> VdfParams {
        self.epoch.params()
    }

    pub fn committee_size(&self) -> usize {
        self.verifiers.len()
    }

    pub fn verifier_keys(&self) -> Vec<PublicKey> {
        self.verifiers.iter().map(|v| v.public_key()).collect()
    }

    /// Per-member signatures over the current canonical parameters.
    pub fn pp_signatures(&self) -> Vec<(PublicKey, Signature)> {
        self.verifiers
            .iter()
            .map(|v| v.public_key())
            .zip(self.pp_signatures.iter().copied())
            .collect()
    }

    /// Rotates to a fresh epoch: new shares, new modulus, cleared books,
    /// incremented epoch counter. Decreasing the difficulty is refused
    /// while transactions for the dApp are still pending.
    pub fn epoch_rotate<R: Rng + ?Sized>(
        &mut self,
        new_difficulty: u64,
        pending_pool: usize,
        rng: &mut R,
    ) -> Result<&EpochConfig, ProtocolError> {
        if new_difficulty < self.epoch.difficulty && pending_pool > 0 {
            return Err(ProtocolError::PendingPoolNotEmpty {
                pending: pending_pool,
            });
        }
        let config = FederationConfig {
            verifier_count: self.verifiers.len() as u32,
            security_bits: self.epoch.security_bits,
            difficulty: new_difficulty,
            vdf_seconds_per_step: self.vdf_seconds_per_step,
            t2_seconds: self.epoch.t2_seconds,
            recommended_tip_pct: self.epoch.recommended_tip_pct,
            freshness_threshold: self.epoch.freshness_threshold,
        };
        let outcome = param_gen(
            &mut self.verifiers,
            new_difficulty,
            config.security_bits,
            rng,
        )?;
        self.epoch = build_epoch(self.epoch.epoch_id + 1, &config, &outcome)?;
        self.pp_signatures = outcome.signatures;
        Ok(&self.epoch)
    }
}

fn build_epoch(
    epoch_id: u64,
    config: &FederationConfig,
    outcome: &ParamGenOutcome,
) -> Result<EpochConfig, ProtocolError> {
    let t1 = config.difficulty as f64 * config.vdf_seconds_per_step;
    if t1 <= config.t2_seconds {
        return Err(ProtocolError::InvalidEpochTiming {
            t1,
            t2: config.t2_seconds,
        });
    }
    Ok(EpochConfig {
        epoch_id,
        difficulty: config.difficulty,
        modulus: outcome.params.modulus().clone(),
        security_bits: config.security_bits,
        recommended_tip_pct: config.recommended_tip_pct,
        freshness_threshold: config.freshness_threshold,
        t1_seconds: t1,
        t2_seconds: config.t2_seconds,
    })
}

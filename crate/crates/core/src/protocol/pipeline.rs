//! Operations of the submission flow (challenge issuance, endorsement,
//! aggregation, proof, transaction assembly) plus a harness that drives a
//! full run against a committee with per-member fault injection.

use super::messages::{
    AcceptEndorsement, ChallengeEndorsement, ChallengeRecord, ChallengeState, FirstTransaction,
    IntentMessage, TxPayload, UserTxIntent,
};
use super::{Address, Federation, Rejection, VerifierId, VerifierState};
use crate::aggsig::{self, KeyPair, PublicKey, Signature, SignedBundle};
use crate::encoding::Encoder;
use crate::primes;
use crate::vdf::{self, VdfParams, VdfProof};
use num_bigint::BigUint;
use rand::Rng;
use sha2::{Digest, Sha256};

/// A user with signing keys and a chain address.
#[derive(Debug, Clone)]
pub struct UserActor {
    pub address: Address,
    pub keypair: KeyPair,
}

impl UserActor {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> UserActor {
        UserActor {
            address: Address::random(rng),
            keypair: aggsig::keygen(rng),
        }
    }
}

/// Builds the intent, its digest, and the signature over the digest.
/// Only the digest and signature are meant to leave the user.
pub fn user_prepare_intent(
    user: &UserActor,
    function_name: &str,
    contract_addr: Address,
) -> UserTxIntent {
    let message = IntentMessage {
        user_addr: user.address,
        function_name: function_name.to_string(),
        contract_addr,
    };
    let digest = message.digest();
    let signature = aggsig::sign(&user.keypair, &digest);
    UserTxIntent {
        message,
        digest,
        signature,
    }
}

/// Coordinator: samples a fresh challenge prime outside its own books.
/// The coordinator is untrusted; every member re-checks freshness.
pub fn coordinator_issue<R: Rng + ?Sized>(
    coordinator: &VerifierState,
    digest: [u8; 32],
    chain_height: u64,
    rng: &mut R,
) -> ChallengeRecord {
    let bits = coordinator
        .params()
        .map(|p| u64::from(p.security_bits()) * 2)
        .unwrap_or(128);
    let ell = loop {
        let candidate = primes::random_prime(rng, bits);
        if !coordinator.has_issued(&candidate) && !coordinator.has_used(&candidate) {
            break candidate;
        }
    };
    ChallengeRecord {
        ell,
        digest,
        block_at_issue: chain_height,
        state: ChallengeState::Issued,
    }
}

/// Committee member endorses a challenge issuance: refuses a prime it has
/// seen before, checks the user's signature over the digest, then signs
/// `(ℓ, h, id, block)` and books ℓ as issued.
pub fn verifier_endorse_challenge(
    state: &mut VerifierState,
    digest: &[u8; 32],
    ell: &BigUint,
    user_sig: &Signature,
    user_key: &PublicKey,
    chain_height: u64,
) -> Result<(ChallengeEndorsement, Signature), Rejection> {
    if state.has_issued(ell) || state.has_used(ell) {
        return Err(Rejection::ReplayedChallenge);
    }
    if !aggsig::verify(user_key, digest, user_sig) {
        return Err(Rejection::BadUserSignature);
    }
    let endorsement = ChallengeEndorsement {
        ell: ell.clone(),
        digest: *digest,
        verifier: state.id,
        block_at_issue: chain_height,
    };
    let signature = aggsig::sign(state.keypair(), &endorsement.canonical_bytes());
    state.issued.insert(ell.clone());
    Ok((endorsement, signature))
}

/// One member's reply to an endorsement request: the signed message bytes.
#[derive(Debug, Clone)]
pub struct EndorsementResponse {
    pub verifier: VerifierId,
    pub message: Vec<u8>,
    pub signature: Signature,
}

/// Coordinator: verifies each member signature individually, discards
/// invalid ones, and aggregates iff a strict majority of the committee
/// contributed. Responses are ordered by member id, one per member.
pub fn coordinator_aggregate(
    committee_keys: &[PublicKey],
    responses: &[EndorsementResponse],
    committee_size: usize,
) -> Result<SignedBundle, Rejection> {
    let mut valid: Vec<&EndorsementResponse> = Vec::new();
    for response in responses {
        let Some(key) = committee_keys.get(response.verifier.0 as usize) else {
            continue;
        };
        if valid.iter().any(|r| r.verifier == response.verifier) {
            continue;
        }
        if aggsig::verify(key, &response.message, &response.signature) {
            valid.push(response);
        }
    }
    valid.sort_by_key(|r| r.verifier);

    if valid.len() * 2 <= committee_size {
        return Err(Rejection::InsufficientMajority {
            valid: valid.len(),
            total: committee_size,
        });
    }

    let messages: Vec<Vec<u8>> = valid.iter().map(|r| r.message.clone()).collect();
    let signatures: Vec<Signature> = valid.iter().map(|r| r.signature).collect();
    let keys: Vec<PublicKey> = valid
        .iter()
        .map(|r| committee_keys[r.verifier.0 as usize])
        .collect();
    let aggregate =
        aggsig::aggregate(&messages, &signatures).map_err(|_| Rejection::BadAggregate)?;
    SignedBundle::new(aggregate, messages, keys).map_err(|_| Rejection::BadAggregate)
}

/// User: checks the challenge bundle and the parameter signatures, then
/// serves the delay by evaluating the proof on the challenge prime.
/// Any failed check refuses before a single squaring is spent.
pub fn user_eval_and_submit_proof(
    record: &mut ChallengeRecord,
    challenge_bundle: &SignedBundle,
    params: &VdfParams,
    pp_signatures: &[(PublicKey, Signature)],
    committee_size: usize,
) -> Result<VdfProof, Rejection> {
    if challenge_bundle.len() * 2 <= committee_size {
        return Err(Rejection::InsufficientMajority {
            valid: challenge_bundle.len(),
            total: committee_size,
        });
    }
    if !aggsig::aggregate_verify(challenge_bundle) {
        return Err(Rejection::BadAggregate);
    }
    let pp_bytes = params.canonical_bytes();
    let valid_pp = pp_signatures
        .iter()
        .filter(|(key, sig)| aggsig::verify(key, &pp_bytes, sig))
        .count();
    if valid_pp * 2 <= committee_size {
        return Err(Rejection::BadParamsSignatures);
    }

    let proof = vdf::eval(params, &record.ell).map_err(|_| Rejection::VdfRejected)?;
    record.advance(ChallengeState::Evaluated);
    Ok(proof)
}

/// Committee member checks a delay proof. The challenge is consumed
/// *before* verification, so a failed proof still burns it.
pub fn verifier_endorse_proof(
    state: &mut VerifierState,
    ell: &BigUint,
    proof: &VdfProof,
) -> Result<(AcceptEndorsement, Signature), Rejection> {
    if state.has_used(ell) {
        return Err(Rejection::ReplayedChallenge);
    }
    if !state.has_issued(ell) {
        return Err(Rejection::UnknownChallenge);
    }
    state.used.insert(ell.clone());

    let params = state
        .current_params
        .clone()
        .ok_or(Rejection::UnknownChallenge)?;
    if &proof.input != ell || !vdf::verify(&params, proof) {
        return Err(Rejection::VdfRejected);
    }
    let endorsement = AcceptEndorsement {
        verifier: state.id,
        ell: ell.clone(),
    };
    let signature = aggsig::sign(state.keypair(), &endorsement.canonical_bytes());
    Ok((endorsement, signature))
}

/// User assembles the final transaction: checks the accept bundle, builds
/// the payload `(intent, challenge bundle, accept bundle)`, and signs it.
pub fn user_build_tx(
    user: &UserActor,
    intent: &UserTxIntent,
    challenge_bundle: SignedBundle,
    accept_bundle: SignedBundle,
    committee_size: usize,
    declared_tip_pct: f64,
) -> Result<FirstTransaction, Rejection> {
    if accept_bundle.len() * 2 <= committee_size {
        return Err(Rejection::InsufficientMajority {
            valid: accept_bundle.len(),
            total: committee_size,
        });
    }
    if !aggsig::aggregate_verify(&accept_bundle) {
        return Err(Rejection::BadAggregate);
    }
    let payload = TxPayload {
        intent: intent.message.clone(),
        challenge_bundle,
        accept_bundle,
    };
    let signature = aggsig::sign(&user.keypair, &payload.canonical_bytes());
    Ok(FirstTransaction {
        signature,
        payload,
        user_key: user.keypair.public(),
        declared_tip_pct,
    })
}

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

/// One logged message on the wire.
#[derive(Debug, Clone)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub from: String,
    pub to: String,
    pub kind: &'static str,
    pub payload: Vec<u8>,
}

impl TranscriptEntry {
    /// Self-describing log line: direction, actors, kind, payload hash.
    pub fn render(&self) -> String {
        format!(
            "{:04} {}->{} {} sha256={} len={}",
            self.seq,
            self.from,
            self.to,
            self.kind,
            hex::encode(Sha256::digest(&self.payload)),
            self.payload.len()
        )
    }
}

/// Append-only message log of one or more runs.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn log(&mut self, from: &str, to: &str, kind: &'static str, payload: Vec<u8>) {
        self.entries.push(TranscriptEntry {
            seq: self.entries.len() as u64,
            from: from.to_string(),
            to: to.to_string(),
            kind,
            payload,
        });
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&entry.render());
            out.push('\n');
        }
        out
    }
}

/// How a committee member behaves during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerifierBehavior {
    #[default]
    Honest,
    /// Never responds.
    Drop,
    /// Responds with the right message but a junk signature.
    GarbageSign,
    /// Responds with a validly signed endorsement for a stale challenge.
    ReplayChallenge,
}

/// Per-member behavior assignment; members not listed act honestly.
#[derive(Debug, Clone, Default)]
pub struct FaultPlan {
    behaviors: Vec<(VerifierId, VerifierBehavior)>,
}

impl FaultPlan {
    pub fn honest() -> FaultPlan {
        FaultPlan::default()
    }

    pub fn with(mut self, id: VerifierId, behavior: VerifierBehavior) -> FaultPlan {
        self.behaviors.retain(|(v, _)| *v != id);
        self.behaviors.push((id, behavior));
        self
    }

    pub fn of(&self, id: VerifierId) -> VerifierBehavior {
        self.behaviors
            .iter()
            .find(|(v, _)| *v == id)
            .map(|(_, b)| *b)
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("run refused after {attempts} attempt(s): {last}")]
    Rejected { last: Rejection, attempts: u32 },
}

/// Knobs of one harness run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub coordinator: VerifierId,
    pub declared_tip_pct: f64,
    /// Fresh-challenge retries after the initial attempt.
    pub max_retries: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            coordinator: VerifierId(0),
            declared_tip_pct: 20.0,
            max_retries: 3,
        }
    }
}

/// A completed run: the submittable transaction, the challenge record,
/// and the delay proof.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub transaction: FirstTransaction,
    pub record: ChallengeRecord,
    pub proof: VdfProof,
}

fn garbage_signature(seed_material: &[u8]) -> Signature {
    use rand::SeedableRng;
    let seed: [u8; 32] = Sha256::digest(seed_material).into();
    let mut rng = rand_chacha::ChaCha20Rng::from_seed(seed);
    Signature::random_for_probe(&mut rng)
}

fn stale_challenge_prime(bits: u64) -> BigUint {
    primes::hash_to_prime(b"first/stale-challenge-fixture", bits as usize)
}

/// Drives the full submission flow for one user against the committee,
/// with faults, logging every message. Refusals burn the challenge and
/// retry with a fresh one up to `max_retries` times.
#[allow(clippy::too_many_arguments)]
pub fn run_pipeline<R: Rng + ?Sized>(
    federation: &mut Federation,
    chain_height: u64,
    user: &UserActor,
    intent: &UserTxIntent,
    config: &PipelineConfig,
    faults: &FaultPlan,
    transcript: &mut Transcript,
    rng: &mut R,
) -> Result<PipelineOutcome, PipelineError> {
    let committee_size = federation.committee_size();
    let committee_keys = federation.verifier_keys();
    let params = federation.params();
    let pp_signatures = federation.pp_signatures();
    let share_bits = u64::from(params.security_bits()) * 2;

    let intent_submission = Encoder::new("first/intent-submission-v1")
        .bytes(&intent.digest)
        .bytes(&intent.signature.to_bytes())
        .finish();

    let mut last_rejection = Rejection::InsufficientMajority {
        valid: 0,
        total: committee_size,
    };
    let attempts = 1 + config.max_retries;
    for _attempt in 0..attempts {
        for verifier in &federation.verifiers {
            transcript.log(
                "user",
                &verifier.id.to_string(),
                "intent-digest",
                intent_submission.clone(),
            );
        }

        // Challenge issuance and endorsement.
        let coordinator = &federation.verifiers[config.coordinator.0 as usize];
        let mut record = coordinator_issue(coordinator, intent.digest, chain_height, rng);
        let issue_payload = Encoder::new("first/challenge-issue-v1")
            .bytes(&intent.digest)
            .biguint(&record.ell)
            .finish();
        let coordinator_name = config.coordinator.to_string();
        for verifier in &federation.verifiers {
            transcript.log(
                &coordinator_name,
                &verifier.id.to_string(),
                "challenge-issue",
                issue_payload.clone(),
            );
        }

        let mut challenge_responses: Vec<EndorsementResponse> = Vec::new();
        for verifier in federation.verifiers.iter_mut() {
            let id = verifier.id;
            match faults.of(id) {
                VerifierBehavior::Drop => continue,
                VerifierBehavior::Honest => {
                    match verifier_endorse_challenge(
                        verifier,
                        &intent.digest,
                        &record.ell,
                        &intent.signature,
                        &user.keypair.public(),
                        chain_height,
                    ) {
                        Ok((endorsement, signature)) => {
                            let message = endorsement.canonical_bytes();
                            transcript.log(
                                &id.to_string(),
                                &coordinator_name,
                                "challenge-endorsement",
                                message.clone(),
                            );
                            challenge_responses.push(EndorsementResponse {
                                verifier: id,
                                message,
                                signature,
                            });
                        }
                        Err(_) => {
                            transcript.log(&id.to_string(), &coordinator_name, "bot", Vec::new());
                        }
                    }
                }
                VerifierBehavior::GarbageSign => {
                    let endorsement = ChallengeEndorsement {
                        ell: record.ell.clone(),
                        digest: intent.digest,
                        verifier: id,
                        block_at_issue: chain_height,
                    };
                    let message = endorsement.canonical_bytes();
                    transcript.log(
                        &id.to_string(),
                        &coordinator_name,
                        "challenge-endorsement",
                        message.clone(),
                    );
                    challenge_responses.push(EndorsementResponse {
                        verifier: id,
                        message: message.clone(),
                        signature: garbage_signature(&message),
                    });
                }
                VerifierBehavior::ReplayChallenge => {
                    let endorsement = ChallengeEndorsement {
                        ell: stale_challenge_prime(share_bits),
                        digest: intent.digest,
                        verifier: id,
                        block_at_issue: chain_height,
                    };
                    let message = endorsement.canonical_bytes();
                    transcript.log(
                        &id.to_string(),
                        &coordinator_name,
                        "challenge-endorsement",
                        message.clone(),
                    );
                    let signature = aggsig::sign(verifier.keypair(), &message);
                    challenge_responses.push(EndorsementResponse {
                        verifier: id,
                        message,
                        signature,
                    });
                }
            }
        }

        let challenge_bundle =
            match coordinator_aggregate(&committee_keys, &challenge_responses, committee_size) {
                Ok(bundle) => bundle,
                Err(rejection) => {
                    transcript.log(&coordinator_name, "user", "bot", Vec::new());
                    last_rejection = rejection;
                    continue;
                }
            };
        transcript.log(
            &coordinator_name,
            "user",
            "challenge-bundle",
            super::messages::bundle_wire_bytes(&challenge_bundle),
        );

        // Delay evaluation.
        let proof = match user_eval_and_submit_proof(
            &mut record,
            &challenge_bundle,
            &params,
            &pp_signatures,
            committee_size,
        ) {
            Ok(proof) => proof,
            Err(rejection) => {
                last_rejection = rejection;
                continue;
            }
        };
        let proof_payload = Encoder::new("first/vdf-proof-v1")
            .biguint(&record.ell)
            .biguint(&proof.output)
            .biguint(&proof.proof)
            .finish();
        for verifier in &federation.verifiers {
            transcript.log(
                "user",
                &verifier.id.to_string(),
                "vdf-proof",
                proof_payload.clone(),
            );
        }

        // Proof endorsement.
        let mut accept_responses: Vec<EndorsementResponse> = Vec::new();
        for verifier in federation.verifiers.iter_mut() {
            let id = verifier.id;
            match faults.of(id) {
                VerifierBehavior::Drop => continue,
                VerifierBehavior::Honest => {
                    match verifier_endorse_proof(verifier, &record.ell, &proof) {
                        Ok((endorsement, signature)) => {
                            let message = endorsement.canonical_bytes();
                            transcript.log(
                                &id.to_string(),
                                &coordinator_name,
                                "accept-endorsement",
                                message.clone(),
                            );
                            accept_responses.push(EndorsementResponse {
                                verifier: id,
                                message,
                                signature,
                            });
                        }
                        Err(_) => {
                            transcript.log(&id.to_string(), &coordinator_name, "bot", Vec::new());
                        }
                    }
                }
                VerifierBehavior::GarbageSign => {
                    let endorsement = AcceptEndorsement {
                        verifier: id,
                        ell: record.ell.clone(),
                    };
                    let message = endorsement.canonical_bytes();
                    transcript.log(
                        &id.to_string(),
                        &coordinator_name,
                        "accept-endorsement",
                        message.clone(),
                    );
                    accept_responses.push(EndorsementResponse {
                        verifier: id,
                        message: message.clone(),
                        signature: garbage_signature(&message),
                    });
                }
                VerifierBehavior::ReplayChallenge => {
                    let endorsement = AcceptEndorsement {
                        verifier: id,
                        ell: stale_challenge_prime(share_bits),
                    };
                    let message = endorsement.canonical_bytes();
                    transcript.log(
                        &id.to_string(),
                        &coordinator_name,
                        "accept-endorsement",
                        message.clone(),
                    );
                    let signature = aggsig::sign(verifier.keypair(), &message);
                    accept_responses.push(EndorsementResponse {
                        verifier: id,
                        message,
                        signature,
                    });
                }
            }
        }

        let accept_bundle =
            match coordinator_aggregate(&committee_keys, &accept_responses, committee_size) {
                Ok(bundle) => bundle,
                Err(rejection) => {
                    transcript.log(&coordinator_name, "user", "bot", Vec::new());
                    last_rejection = rejection;
                    continue;
                }
            };
        transcript.log(
            &coordinator_name,
            "user",
            "accept-bundle",
            super::messages::bundle_wire_bytes(&accept_bundle),
        );

        // Final assembly and reveal.
        match user_build_tx(
            user,
            intent,
            challenge_bundle,
            accept_bundle,
            committee_size,
            config.declared_tip_pct,
        ) {
            Ok(transaction) => {
                record.advance(ChallengeState::Consumed);
                transcript.log(
                    "user",
                    "chain",
                    "first-transaction",
                    transaction.canonical_bytes(),
                );
                return Ok(PipelineOutcome {
                    transaction,
                    record,
                    proof,
                });
            }
            Err(rejection) => {
                last_rejection = rejection;
                continue;
            }
        }
    }

    Err(PipelineError::Rejected {
        last: last_rejection,
        attempts,
    })
}

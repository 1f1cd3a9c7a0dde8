//! Wire messages of the submission flow and their canonical encodings.

use super::{Address, VerifierId};
use crate::aggsig::{PublicKey, Signature, SignedBundle};
use crate::encoding::{digest, DecodeError, Decoder, Encoder};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

/// The transaction details a user keeps secret until the delay is served:
/// their address, the function to invoke, and the contract address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentMessage {
    pub user_addr: Address,
    pub function_name: String,
    pub contract_addr: Address,
}

impl IntentMessage {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        Encoder::new("first/intent-v1")
            .bytes(&self.user_addr.0)
            .str(&self.function_name)
            .bytes(&self.contract_addr.0)
            .finish()
    }

    /// The digest `h` that circulates in place of the preimage.
    pub fn digest(&self) -> [u8; 32] {
        digest(&self.canonical_bytes())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes, "first/intent-v1")?;
        let user_addr: [u8; 20] = dec.bytes()?.try_into().map_err(|_| DecodeError::BadWidth)?;
        let function_name = dec.str()?;
        let contract_addr: [u8; 20] = dec.bytes()?.try_into().map_err(|_| DecodeError::BadWidth)?;
        dec.finish()?;
        Ok(IntentMessage {
            user_addr: Address(user_addr),
            function_name,
            contract_addr: Address(contract_addr),
        })
    }
}

/// A prepared intent: the secret preimage, its digest, and the user's
/// signature over the digest. Only `(digest, signature)` leave the user
/// before the reveal.
#[derive(Debug, Clone)]
pub struct UserTxIntent {
    pub message: IntentMessage,
    pub digest: [u8; 32],
    pub signature: Signature,
}

/// Lifecycle of an issued challenge prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChallengeState {
    Issued,
    Evaluated,
    Consumed,
}

/// Coordinator-side record of one issued challenge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeRecord {
    pub ell: BigUint,
    pub digest: [u8; 32],
    pub block_at_issue: u64,
    pub state: ChallengeState,
}

impl ChallengeRecord {
    /// Transitions are monotone: issued → evaluated → consumed.
    pub fn advance(&mut self, next: ChallengeState) {
        let ok = matches!(
            (self.state, next),
            (ChallengeState::Issued, ChallengeState::Evaluated)
                | (ChallengeState::Evaluated, ChallengeState::Consumed)
        );
        assert!(
            ok,
            "challenge state may only advance: {:?} -> {next:?}",
            self.state
        );
        self.state = next;
    }
}

/// A committee member's endorsement of a challenge issuance: the prime,
/// the user digest, the member identity, and the block height it saw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeEndorsement {
    pub ell: BigUint,
    pub digest: [u8; 32],
    pub verifier: VerifierId,
    pub block_at_issue: u64,
}

impl ChallengeEndorsement {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        Encoder::new("first/challenge-endorsement-v1")
            .biguint(&self.ell)
            .bytes(&self.digest)
            .u32(self.verifier.0)
            .u64(self.block_at_issue)
            .finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes, "first/challenge-endorsement-v1")?;
        let ell = dec.biguint()?;
        let digest: [u8; 32] = dec.bytes()?.try_into().map_err(|_| DecodeError::BadWidth)?;
        let verifier = VerifierId(dec.u32()?);
        let block_at_issue = dec.u64()?;
        dec.finish()?;
        Ok(ChallengeEndorsement {
            ell,
            digest,
            verifier,
            block_at_issue,
        })
    }
}

/// A committee member's attestation that the delay proof for `ell`
/// verified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptEndorsement {
    pub verifier: VerifierId,
    pub ell: BigUint,
}

impl AcceptEndorsement {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        Encoder::new("first/accept-endorsement-v1")
            .str("accept")
            .u32(self.verifier.0)
            .biguint(&self.ell)
            .finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes, "first/accept-endorsement-v1")?;
        let verdict = dec.str()?;
        if verdict != "accept" {
            return Err(DecodeError::TagMismatch {
                expected: "accept".to_string(),
            });
        }
        let verifier = VerifierId(dec.u32()?);
        let ell = dec.biguint()?;
        dec.finish()?;
        Ok(AcceptEndorsement { verifier, ell })
    }
}

/// The revealed transaction body: the intent preimage plus both
/// endorsement bundles (challenge phase and proof phase).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxPayload {
    pub intent: IntentMessage,
    pub challenge_bundle: SignedBundle,
    pub accept_bundle: SignedBundle,
}

/// Canonical byte form of a bundle as it crosses the wire.
pub fn bundle_wire_bytes(bundle: &SignedBundle) -> Vec<u8> {
    let mut enc = Encoder::new("first/bundle-v1")
        .bytes(&bundle.aggregate.to_bytes())
        .u32(bundle.messages.len() as u32);
    for message in &bundle.messages {
        enc = enc.bytes(message);
    }
    for key in &bundle.public_keys {
        enc = enc.bytes(&key.to_bytes());
    }
    enc.finish()
}

impl TxPayload {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        Encoder::new("first/tx-payload-v1")
            .bytes(&self.intent.canonical_bytes())
            .bytes(&bundle_wire_bytes(&self.challenge_bundle))
            .bytes(&bundle_wire_bytes(&self.accept_bundle))
            .finish()
    }
}

/// The final on-chain submission: the user's outer signature over the
/// payload, the payload itself, the user's public key, and the tip the
/// user declares (as percent of base fee).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstTransaction {
    pub signature: Signature,
    pub payload: TxPayload,
    pub user_key: PublicKey,
    pub declared_tip_pct: f64,
}

impl FirstTransaction {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        Encoder::new("first/transaction-v1")
            .bytes(&self.signature.to_bytes())
            .bytes(&self.payload.canonical_bytes())
            .bytes(&self.user_key.to_bytes())
            .finish()
    }
}

//! Deterministic chain model: fee market, greedy miner, and the on-chain
//! validation engine for delay-protected transactions.

pub mod sim;

pub use sim::{
    run_simulation, AdversaryStrategy, SimConfig, SimError, SimReport, TipDistribution, TxRecord,
};

use crate::aggsig::{self, PublicKey};
use crate::protocol::{
    AcceptEndorsement, ChallengeEndorsement, ContractDescriptor, FirstTransaction,
};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Why the contract refused a transaction. One reason per check, in
/// evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum RejectReason {
    #[error("intent preimage does not hash to any endorsed digest")]
    HashMismatch,
    #[error("no decodable challenge endorsement in the bundle")]
    MissingChallenge,
    #[error("no accept endorsement matches an endorsed challenge")]
    MissingAccept,
    #[error("either bundle lacks a strict committee majority")]
    NoMajority,
    #[error("an aggregate or the outer signature fails verification")]
    BadAggregate,
    #[error("challenge issuance is outside the freshness window")]
    Stale,
}

fn distinct_registered_keys(bundle_keys: &[PublicKey], registered: &[PublicKey]) -> usize {
    let registry: HashSet<[u8; 96]> = registered.iter().map(|k| k.to_bytes()).collect();
    let mut seen: HashSet<[u8; 96]> = HashSet::new();
    for key in bundle_keys {
        let bytes = key.to_bytes();
        if registry.contains(&bytes) {
            seen.insert(bytes);
        }
    }
    seen.len()
}

/// Issuance height may not be in the future and may lag at most
/// `threshold` blocks behind the validating block.
pub fn freshness_ok(block_at_issue: u64, block_now: u64, threshold: u64) -> bool {
    block_now >= block_at_issue && block_now - block_at_issue <= threshold
}

/// The contract's admission decision, run against a submitted
/// transaction at validation height `block_now`.
///
/// Checks, in order: the revealed intent hashes to an endorsed digest;
/// a decodable challenge endorsement exists; some accept endorsement
/// attests the same challenge prime; both bundles carry a strict majority
/// of distinct registered committee keys; both aggregates and the user's
/// outer signature verify; the issuance height (the earliest among
/// matching endorsements) is fresh.
pub fn contract_validate(
    tx: &FirstTransaction,
    block_now: u64,
    threshold: u64,
    verifier_keys: &[PublicKey],
) -> Result<(), RejectReason> {
    let payload = &tx.payload;
    let expected_digest = payload.intent.digest();

    let challenges: Vec<ChallengeEndorsement> = payload
        .challenge_bundle
        .messages
        .iter()
        .filter_map(|m| ChallengeEndorsement::decode(m).ok())
        .collect();
    if challenges.is_empty() {
        return Err(RejectReason::MissingChallenge);
    }
    let matching: Vec<&ChallengeEndorsement> = challenges
        .iter()
        .filter(|c| c.digest == expected_digest)
        .collect();
    if matching.is_empty() {
        return Err(RejectReason::HashMismatch);
    }

    let accepts: Vec<AcceptEndorsement> = payload
        .accept_bundle
        .messages
        .iter()
        .filter_map(|m| AcceptEndorsement::decode(m).ok())
        .collect();
    let issued: HashSet<&BigUint> = matching.iter().map(|c| &c.ell).collect();
    let accepted_ell = accepts
        .iter()
        .filter(|a| issued.contains(&a.ell))
        .map(|a| &a.ell)
        .min()
        .cloned();
    let Some(ell) = accepted_ell else {
        return Err(RejectReason::MissingAccept);
    };

    let committee = verifier_keys.len();
    let challenge_majority =
        distinct_registered_keys(&payload.challenge_bundle.public_keys, verifier_keys);
    let accept_majority =
        distinct_registered_keys(&payload.accept_bundle.public_keys, verifier_keys);
    if challenge_majority * 2 <= committee || accept_majority * 2 <= committee {
        return Err(RejectReason::NoMajority);
    }

    if !aggsig::aggregate_verify(&payload.challenge_bundle)
        || !aggsig::aggregate_verify(&payload.accept_bundle)
        || !aggsig::verify(&tx.user_key, &payload.canonical_bytes(), &tx.signature)
    {
        return Err(RejectReason::BadAggregate);
    }

    let block_at_issue = matching
        .iter()
        .filter(|c| c.ell == ell)
        .map(|c| c.block_at_issue)
        .min()
        .expect("ell came from the matching set");
    if !freshness_ok(block_at_issue, block_now, threshold) {
        return Err(RejectReason::Stale);
    }
    Ok(())
}

/// Updates the base fee from the parent block's utilization:
/// `delta = parent * (gas_used - target) / target / 8`, floored at 1.
pub fn base_fee_update(parent_base_fee: u64, parent_gas_used: u64, gas_target: u64) -> u64 {
    assert!(gas_target > 0, "gas target must be positive");
    let parent = parent_base_fee as i128;
    let delta = parent * (parent_gas_used as i128 - gas_target as i128) / gas_target as i128 / 8;
    (parent + delta).max(1) as u64
}

/// Stable identity of a simulated transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TxId(pub u64);

/// A transaction waiting in the pool, reduced to what ordering needs.
#[derive(Debug, Clone)]
pub struct MempoolEntry {
    pub id: TxId,
    /// Priority fee in wei; the only field the miner ranks by.
    pub tip: u64,
    pub submit_time_us: u64,
    pub gas: u64,
    /// Ordering tie-break of last resort.
    pub hash: [u8; 32],
}

/// Greedy miner: rank by tip descending (ties: earlier submission, then
/// hash), then take entries that still fit the gas limit and the per-block
/// transaction cap. Returns the included ids in execution order.
pub fn mine_block(pool: &[MempoolEntry], block_gas_limit: u64, max_txs: usize) -> Vec<TxId> {
    let mut order: Vec<&MempoolEntry> = pool.iter().collect();
    order.sort_by(|a, b| {
        b.tip
            .cmp(&a.tip)
            .then(a.submit_time_us.cmp(&b.submit_time_us))
            .then(a.hash.cmp(&b.hash))
    });
    let mut included = Vec::new();
    let mut gas_used = 0u64;
    for entry in order {
        if included.len() >= max_txs {
            break;
        }
        if gas_used + entry.gas > block_gas_limit {
            continue;
        }
        gas_used += entry.gas;
        included.push(entry.id);
    }
    included
}

/// One mined block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Block {
    pub number: u64,
    pub base_fee: u64,
    pub gas_used: u64,
    pub tx_ids: Vec<TxId>,
}

/// Ledger state: mined blocks, the running base fee, and deployed
/// contract descriptors.
#[derive(Debug, Clone)]
pub struct Chain {
    blocks: Vec<Block>,
    base_fee: u64,
    gas_target: u64,
    contracts: Vec<ContractDescriptor>,
}

impl Chain {
    pub fn new(base_fee_init: u64, gas_target: u64) -> Chain {
        Chain {
            blocks: Vec::new(),
            base_fee: base_fee_init,
            gas_target,
            contracts: Vec::new(),
        }
    }

    /// Number of mined blocks; also the current height.
    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn base_fee(&self) -> u64 {
        self.base_fee
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn deploy(&mut self, descriptor: ContractDescriptor) {
        self.contracts.push(descriptor);
    }

    pub fn contract(&self, address: &crate::protocol::Address) -> Option<&ContractDescriptor> {
        self.contracts.iter().find(|c| c.address == *address)
    }

    /// Appends a block and rolls the base fee forward.
    pub fn push_block(&mut self, gas_used: u64, tx_ids: Vec<TxId>) -> &Block {
        let number = self.height() + 1;
        let block = Block {
            number,
            base_fee: self.base_fee,
            gas_used,
            tx_ids,
        };
        self.base_fee = base_fee_update(self.base_fee, gas_used, self.gas_target);
        self.blocks.push(block);
        self.blocks.last().expect("just pushed")
    }

    /// Mines an empty block; tests use this to advance the height.
    pub fn advance_blocks(&mut self, count: u64) {
        for _ in 0..count {
            self.push_block(0, Vec::new());
        }
    }
}

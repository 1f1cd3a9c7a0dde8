//! Discrete-event simulation of a fee-market chain under frontrunning
//! pressure.
//!
//! Time is continuous (integer microseconds), blocks are mined on a fixed
//! interval, and the miner is greedy by tip. Users of the protected dApp
//! serve the delay `t1 = T * vdf_seconds_per_step` between challenge
//! issuance and pool entry; the adversary watches the pool and reacts per
//! its strategy. Everything is driven by independent seeded RNG streams,
//! so a (config, seed) pair reproduces byte-identical reports — and
//! changing the adversary's timing does not perturb arrivals or tips.

use super::{contract_validate, freshness_ok, mine_block, Chain, MempoolEntry, RejectReason, TxId};
use crate::protocol::pipeline::{
    run_pipeline, user_prepare_intent, FaultPlan, PipelineConfig, Transcript, UserActor,
};
use crate::protocol::{Federation, FederationConfig, FirstTransaction};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BinaryHeap;
use std::fmt::Write as _;

/// Tip model for background traffic, as percent of the current base fee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TipDistribution {
    FixedPct { value: f64 },
    UniformPct { lo: f64, hi: f64 },
    ExponentialPct { mean: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryStrategy {
    /// No adversary in the network.
    None,
    /// Starts its own delay pipeline upon seeing a victim, then outbids.
    Reactive,
    /// Acquired a challenge and proof long in advance; submits instantly.
    OfflinePrecompute,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
}

/// Full description of one simulation. Serialized as `simconfig/1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub schema: String,
    pub seed: u64,
    pub duration_s: f64,
    pub block_interval_s: f64,
    pub block_gas_target: u64,
    pub block_gas_limit: u64,
    pub base_fee_init: u64,
    /// Background transactions per second.
    pub tx_arrival_rate: f64,
    pub tip_distribution: TipDistribution,
    /// Protected-dApp users per second.
    pub victim_arrival_rate: f64,
    pub victim_tip_pct: f64,
    pub gas_per_tx: u64,
    pub difficulty_t: u64,
    pub vdf_seconds_per_step: f64,
    pub freshness_threshold: u64,
    pub adversary_strategy: AdversaryStrategy,
    /// Tip margin over the victim, in percent.
    pub adversary_tip_bump_pct: f64,
    /// Hard cap on transactions per block.
    pub block_qty: u64,
    /// Run the full cryptographic pipeline for protected transactions
    /// and validate them with the real contract engine. Keep the
    /// difficulty small in this mode.
    #[serde(default)]
    pub real_vdf: bool,
    #[serde(default = "default_verifier_count")]
    pub verifier_count: u32,
}

fn default_verifier_count() -> u32 {
    3
}

pub const SIM_CONFIG_SCHEMA: &str = "simconfig/1";
pub const SIM_REPORT_SCHEMA: &str = "simreport/1";

impl SimConfig {
    /// The imposed wall delay between issuance and pool entry.
    pub fn t1_seconds(&self) -> f64 {
        self.difficulty_t as f64 * self.vdf_seconds_per_step
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: &str| Err(SimError::ConfigInvalid(msg.to_string()));
        if self.schema != SIM_CONFIG_SCHEMA {
            return fail("schema must be simconfig/1");
        }
        if self.duration_s.is_nan()
            || self.duration_s <= 0.0
            || self.block_interval_s.is_nan()
            || self.block_interval_s <= 0.0
        {
            return fail("duration_s and block_interval_s must be positive");
        }
        if self.block_gas_target == 0 || self.block_gas_limit == 0 || self.gas_per_tx == 0 {
            return fail("gas parameters must be positive");
        }
        if self.base_fee_init == 0 {
            return fail("base_fee_init must be positive");
        }
        if self.tx_arrival_rate < 0.0 || self.victim_arrival_rate < 0.0 {
            return fail("arrival rates must be non-negative");
        }
        // Zero is deliberately allowed: it models the no-delay
        // counterfactual in which the reactive adversary reacts instantly.
        if self.vdf_seconds_per_step < 0.0 {
            return fail("vdf_seconds_per_step must be non-negative");
        }
        if self.victim_tip_pct < 0.0 || self.adversary_tip_bump_pct < 0.0 {
            return fail("tip percentages must be non-negative");
        }
        if self.block_qty == 0 {
            return fail("block_qty must be positive");
        }
        match self.tip_distribution {
            TipDistribution::FixedPct { value } if value < 0.0 => {
                return fail("tip distribution values must be non-negative")
            }
            TipDistribution::UniformPct { lo, hi } if lo < 0.0 || hi < lo => {
                return fail("uniform tip bounds must satisfy 0 <= lo <= hi")
            }
            TipDistribution::ExponentialPct { mean } if mean <= 0.0 => {
                return fail("exponential tip mean must be positive")
            }
            _ => {}
        }
        if self.real_vdf {
            if self.difficulty_t > 1 << 16 {
                return fail("real_vdf runs are limited to difficulty_t <= 65536");
            }
            if self.verifier_count < 3 || self.verifier_count.is_multiple_of(2) {
                return fail("real_vdf needs an odd committee of at least 3");
            }
        }
        Ok(())
    }
}

/// Per-transaction outcome row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub tx_id: u64,
    pub kind: String,
    pub tip_wei: u64,
    pub submit_s: f64,
    pub confirm_s: Option<f64>,
    pub waited_s: Option<f64>,
    pub block: Option<u64>,
    pub status: String,
    pub frontrun: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStat {
    pub number: u64,
    pub base_fee: u64,
    pub gas_used: u64,
    pub tx_count: u64,
}

/// Simulation outcome: per-transaction rows plus aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema: String,
    pub seed: u64,
    pub frontrun_rate: f64,
    pub victim_count: u64,
    pub frontrun_count: u64,
    pub submitted: u64,
    pub confirmed: u64,
    pub rejected: u64,
    pub pending: u64,
    pub blocks: Vec<BlockStat>,
    pub records: Vec<TxRecord>,
}

impl SimReport {
    /// Aggregate view (everything except the per-transaction rows).
    pub fn aggregate_json(&self) -> String {
        let mut trimmed = self.clone();
        trimmed.records = Vec::new();
        serde_json::to_string_pretty(&trimmed).expect("report serializes")
    }

    /// Per-transaction rows as CSV.
    pub fn records_csv(&self) -> String {
        let mut out =
            String::from("tx_id,kind,tip_wei,submit_s,confirm_s,waited_s,block,status,frontrun\n");
        for r in &self.records {
            let opt = |v: Option<f64>| match v {
                Some(x) => format!("{x:.6}"),
                None => String::new(),
            };
            let blk = r.block.map(|b| b.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{:.6},{},{},{},{},{}",
                r.tx_id,
                r.kind,
                r.tip_wei,
                r.submit_s,
                opt(r.confirm_s),
                opt(r.waited_s),
                blk,
                r.status,
                r.frontrun
            )
            .expect("string write");
        }
        out
    }
}

const US: f64 = 1_000_000.0;

fn to_us(seconds: f64) -> u64 {
    (seconds * US).round() as u64
}

fn stream(seed: u64, label: &str) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"first/sim-stream-v1");
    hasher.update(seed.to_be_bytes());
    hasher.update(label.as_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

fn exponential_gap(rng: &mut ChaCha20Rng, rate: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    -(1.0 - u).ln() / rate
}

fn arrival_times(seed: u64, label: &str, rate: f64, duration_s: f64) -> Vec<u64> {
    let mut rng = stream(seed, label);
    let mut times = Vec::new();
    if rate <= 0.0 {
        return times;
    }
    let mut t = 0.0f64;
    loop {
        t += exponential_gap(&mut rng, rate);
        if t >= duration_s {
            break;
        }
        times.push(to_us(t));
    }
    times
}

fn draw_tip_pct(dist: &TipDistribution, rng: &mut ChaCha20Rng) -> f64 {
    match dist {
        TipDistribution::FixedPct { value } => *value,
        TipDistribution::UniformPct { lo, hi } => {
            if hi > lo {
                rng.gen_range(*lo..*hi)
            } else {
                *lo
            }
        }
        TipDistribution::ExponentialPct { mean } => {
            let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            -(1.0 - u).ln() * mean
        }
    }
}

fn pct_of(base_fee: u64, pct: f64) -> u64 {
    ((base_fee as f64) * pct / 100.0).round() as u64
}

#[derive(Debug, Clone)]
enum Validity {
    Plain,
    Modeled { block_at_issue: u64 },
    Real(Box<FirstTransaction>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Background,
    Victim,
    Adversary { victim: TxId },
}

struct TxState {
    kind: Kind,
    tip: u64,
    submit_us: u64,
    validity: Validity,
    confirmed: Option<(u64, usize, u64)>, // (block, index, time_us)
    rejected: Option<RejectReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    VictimIssue { victim_index: usize },
    VictimEnterPool { victim_index: usize },
    BackgroundArrival { index: usize },
    AdversarySubmit { victim: TxId },
    MineBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Event {
    time_us: u64,
    seq: u64,
    kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reversed for the max-heap: earliest time, then insertion order.
        other
            .time_us
            .cmp(&self.time_us)
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn tx_hash(id: u64, salt: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"first/sim-tx-hash-v1");
    hasher.update(id.to_be_bytes());
    hasher.update(salt.to_be_bytes());
    hasher.finalize().into()
}

/// Crypto context for `real_vdf` runs.
struct RealPipeline {
    federation: Federation,
    user: UserActor,
    adversary: UserActor,
    rng: ChaCha20Rng,
}

impl RealPipeline {
    fn build_tx(&mut self, who: &str, chain_height: u64, tip_pct: f64) -> FirstTransaction {
        let user = if who == "victim" {
            self.user.clone()
        } else {
            self.adversary.clone()
        };
        let intent = user_prepare_intent(&user, "execute", self.federation.contract.address);
        let mut transcript = Transcript::default();
        let config = PipelineConfig {
            declared_tip_pct: tip_pct,
            ..PipelineConfig::default()
        };
        run_pipeline(
            &mut self.federation,
            chain_height,
            &user,
            &intent,
            &config,
            &FaultPlan::honest(),
            &mut transcript,
            &mut self.rng,
        )
        .expect("honest pipeline completes")
        .transaction
    }
}

/// Runs the configured scenario to its horizon. Deterministic: the same
/// `(config, seed)` yields an identical report, byte for byte.
pub fn run_simulation(config: &SimConfig) -> Result<SimReport, SimError> {
    config.validate()?;

    let seed = config.seed;
    let duration_us = to_us(config.duration_s);
    let t1_us = to_us(config.t1_seconds());

    let background_times = arrival_times(
        seed,
        "background-arrivals",
        config.tx_arrival_rate,
        config.duration_s,
    );
    let victim_times = arrival_times(
        seed,
        "victim-arrivals",
        config.victim_arrival_rate,
        config.duration_s,
    );
    let mut tip_rng = stream(seed, "background-tips");

    let mut chain = Chain::new(config.base_fee_init, config.block_gas_target);

    let mut real = if config.real_vdf {
        let mut boot_rng = stream(seed, "real-pipeline");
        let fed_config = FederationConfig {
            verifier_count: config.verifier_count,
            security_bits: 64,
            difficulty: config.difficulty_t,
            vdf_seconds_per_step: config.vdf_seconds_per_step,
            t2_seconds: if config.t1_seconds() > 0.0 { 0.0 } else { -1.0 },
            recommended_tip_pct: config.victim_tip_pct,
            freshness_threshold: config.freshness_threshold,
        };
        let federation = Federation::bootstrap(&mut chain, &fed_config, &mut boot_rng)
            .map_err(|e| SimError::ConfigInvalid(format!("real_vdf bootstrap failed: {e}")))?;
        let user = UserActor::new(&mut boot_rng);
        let adversary = UserActor::new(&mut boot_rng);
        Some(RealPipeline {
            federation,
            user,
            adversary,
            rng: boot_rng,
        })
    } else {
        None
    };

    // Offline precompute predates the observation window: the adversary
    // holds a proof tied to the genesis height, and the window opens only
    // after the freshness horizon has passed. Warmup blocks carry target
    // gas so the base fee stays put.
    let offline_tx: Option<FirstTransaction> = match (&mut real, config.adversary_strategy) {
        (Some(ctx), AdversaryStrategy::OfflinePrecompute) => {
            Some(ctx.build_tx("adversary", chain.height(), config.victim_tip_pct))
        }
        _ => None,
    };
    if config.adversary_strategy == AdversaryStrategy::OfflinePrecompute {
        for _ in 0..=config.freshness_threshold {
            chain.push_block(config.block_gas_target, Vec::new());
        }
    }

    let mut events: BinaryHeap<Event> = BinaryHeap::new();
    let mut seq = 0u64;
    let push = |heap: &mut BinaryHeap<Event>, seq: &mut u64, time_us: u64, kind: EventKind| {
        let event = Event {
            time_us,
            seq: *seq,
            kind,
        };
        *seq += 1;
        heap.push(event);
    };

    for (index, &t) in background_times.iter().enumerate() {
        push(
            &mut events,
            &mut seq,
            t,
            EventKind::BackgroundArrival { index },
        );
    }
    for (index, &t) in victim_times.iter().enumerate() {
        push(
            &mut events,
            &mut seq,
            t,
            EventKind::VictimIssue {
                victim_index: index,
            },
        );
    }
    let interval_us = to_us(config.block_interval_s);
    let mut t = interval_us;
    while t <= duration_us {
        push(&mut events, &mut seq, t, EventKind::MineBlock);
        t += interval_us;
    }

    let mut states: Vec<TxState> = Vec::new();
    let mut pool: Vec<MempoolEntry> = Vec::new();
    let mut victim_ids: Vec<Option<TxId>> = vec![None; victim_times.len()];
    let mut victim_issue_block: Vec<u64> = vec![0; victim_times.len()];

    let new_tx = |states: &mut Vec<TxState>,
                  kind: Kind,
                  tip: u64,
                  submit_us: u64,
                  validity: Validity|
     -> TxId {
        let id = TxId(states.len() as u64);
        states.push(TxState {
            kind,
            tip,
            submit_us,
            validity,
            confirmed: None,
            rejected: None,
        });
        id
    };

    while let Some(event) = events.pop() {
        // The report covers exactly the horizon; later deliveries lapse.
        if event.time_us > duration_us {
            break;
        }
        match event.kind {
            EventKind::BackgroundArrival { .. } => {
                let pct = draw_tip_pct(&config.tip_distribution, &mut tip_rng);
                let tip = pct_of(chain.base_fee(), pct);
                let id = new_tx(
                    &mut states,
                    Kind::Background,
                    tip,
                    event.time_us,
                    Validity::Plain,
                );
                pool.push(MempoolEntry {
                    id,
                    tip,
                    submit_time_us: event.time_us,
                    gas: config.gas_per_tx,
                    hash: tx_hash(id.0, seed),
                });
            }
            EventKind::VictimIssue { victim_index } => {
                victim_issue_block[victim_index] = chain.height();
                push(
                    &mut events,
                    &mut seq,
                    event.time_us + t1_us,
                    EventKind::VictimEnterPool { victim_index },
                );
            }
            EventKind::VictimEnterPool { victim_index } => {
                let tip = pct_of(chain.base_fee(), config.victim_tip_pct);
                let issue_block = victim_issue_block[victim_index];
                let validity = match &mut real {
                    Some(ctx) => Validity::Real(Box::new(ctx.build_tx(
                        "victim",
                        issue_block,
                        config.victim_tip_pct,
                    ))),
                    None => Validity::Modeled {
                        block_at_issue: issue_block,
                    },
                };
                let id = new_tx(&mut states, Kind::Victim, tip, event.time_us, validity);
                victim_ids[victim_index] = Some(id);
                pool.push(MempoolEntry {
                    id,
                    tip,
                    submit_time_us: event.time_us,
                    gas: config.gas_per_tx,
                    hash: tx_hash(id.0, seed),
                });

                // The adversary sees the victim the moment it hits the pool.
                match config.adversary_strategy {
                    AdversaryStrategy::None => {}
                    AdversaryStrategy::Reactive => {
                        push(
                            &mut events,
                            &mut seq,
                            event.time_us + t1_us,
                            EventKind::AdversarySubmit { victim: id },
                        );
                    }
                    AdversaryStrategy::OfflinePrecompute => {
                        push(
                            &mut events,
                            &mut seq,
                            event.time_us,
                            EventKind::AdversarySubmit { victim: id },
                        );
                    }
                }
            }
            EventKind::AdversarySubmit { victim } => {
                let victim_tip = states[victim.0 as usize].tip;
                let bumped = (victim_tip as f64 * (1.0 + config.adversary_tip_bump_pct / 100.0))
                    .round() as u64;
                let tip = bumped.max(victim_tip + 1);
                let validity = match config.adversary_strategy {
                    AdversaryStrategy::Reactive => match &mut real {
                        // Issuance happened at observation time, t1 ago.
                        Some(ctx) => {
                            let issue_block = chain.height().min(block_at_time(
                                event.time_us.saturating_sub(t1_us),
                                interval_us,
                            ));
                            Validity::Real(Box::new(ctx.build_tx(
                                "adversary",
                                issue_block,
                                config.victim_tip_pct,
                            )))
                        }
                        None => Validity::Modeled {
                            block_at_issue: block_at_time(
                                event.time_us.saturating_sub(t1_us),
                                interval_us,
                            ),
                        },
                    },
                    AdversaryStrategy::OfflinePrecompute => match &offline_tx {
                        Some(tx) => Validity::Real(Box::new(tx.clone())),
                        None => Validity::Modeled { block_at_issue: 0 },
                    },
                    AdversaryStrategy::None => unreachable!("no adversary events when disabled"),
                };
                let id = new_tx(
                    &mut states,
                    Kind::Adversary { victim },
                    tip,
                    event.time_us,
                    validity,
                );
                pool.push(MempoolEntry {
                    id,
                    tip,
                    submit_time_us: event.time_us,
                    gas: config.gas_per_tx,
                    hash: tx_hash(id.0, seed),
                });
            }
            EventKind::MineBlock => {
                let block_number = chain.height() + 1;
                let included = mine_block(&pool, config.block_gas_limit, config.block_qty as usize);
                let mut gas_used = 0u64;
                for (index, id) in included.iter().enumerate() {
                    let state = &mut states[id.0 as usize];
                    gas_used += config.gas_per_tx;
                    let verdict = match &state.validity {
                        Validity::Plain => Ok(()),
                        Validity::Modeled { block_at_issue } => {
                            if freshness_ok(
                                *block_at_issue,
                                block_number,
                                config.freshness_threshold,
                            ) {
                                Ok(())
                            } else {
                                Err(RejectReason::Stale)
                            }
                        }
                        Validity::Real(tx) => {
                            let keys = real
                                .as_ref()
                                .map(|ctx| ctx.federation.verifier_keys())
                                .unwrap_or_default();
                            contract_validate(tx, block_number, config.freshness_threshold, &keys)
                        }
                    };
                    match verdict {
                        Ok(()) => state.confirmed = Some((block_number, index, event.time_us)),
                        Err(reason) => state.rejected = Some(reason),
                    }
                }
                let included_set: std::collections::HashSet<TxId> =
                    included.iter().copied().collect();
                pool.retain(|entry| !included_set.contains(&entry.id));
                chain.push_block(gas_used, included);
            }
        }
    }

    // Frontrun accounting: a victim is frontrun when its paired adversary
    // transaction executes strictly before the victim does.
    let mut frontrun: Vec<bool> = vec![false; states.len()];
    for state in &states {
        if let Kind::Adversary { victim } = state.kind {
            if let Some((adv_block, adv_idx, _)) = state.confirmed {
                let beaten = match states[victim.0 as usize].confirmed {
                    Some((vic_block, vic_idx, _)) => (adv_block, adv_idx) < (vic_block, vic_idx),
                    None => true,
                };
                if beaten {
                    frontrun[victim.0 as usize] = true;
                }
            }
        }
    }

    let mut records = Vec::with_capacity(states.len());
    let mut victim_count = 0u64;
    let mut frontrun_count = 0u64;
    let mut confirmed = 0u64;
    let mut rejected = 0u64;
    let mut pending = 0u64;
    for (index, state) in states.iter().enumerate() {
        let kind = match state.kind {
            Kind::Background => "background",
            Kind::Victim => "victim",
            Kind::Adversary { .. } => "adversary",
        };
        let (status, block, confirm_s) = match (state.confirmed, state.rejected) {
            (Some((block, _, time_us)), _) => {
                confirmed += 1;
                (
                    "confirmed".to_string(),
                    Some(block),
                    Some(time_us as f64 / US),
                )
            }
            (None, Some(reason)) => {
                rejected += 1;
                (format!("rejected:{reason:?}"), None, None)
            }
            (None, None) => {
                pending += 1;
                ("pending".to_string(), None, None)
            }
        };
        let was_frontrun = state.kind == Kind::Victim && frontrun[index];
        if state.kind == Kind::Victim {
            victim_count += 1;
            if was_frontrun {
                frontrun_count += 1;
            }
        }
        let submit_s = state.submit_us as f64 / US;
        records.push(TxRecord {
            tx_id: index as u64,
            kind: kind.to_string(),
            tip_wei: state.tip,
            submit_s,
            confirm_s,
            waited_s: confirm_s.map(|c| c - submit_s),
            block,
            status,
            frontrun: was_frontrun,
        });
    }

    let blocks = chain
        .blocks()
        .iter()
        .map(|b| BlockStat {
            number: b.number,
            base_fee: b.base_fee,
            gas_used: b.gas_used,
            tx_count: b.tx_ids.len() as u64,
        })
        .collect();

    Ok(SimReport {
        schema: SIM_REPORT_SCHEMA.to_string(),
        seed,
        frontrun_rate: if victim_count == 0 {
            0.0
        } else {
            frontrun_count as f64 / victim_count as f64
        },
        victim_count,
        frontrun_count,
        submitted: states.len() as u64,
        confirmed,
        rejected,
        pending,
        blocks,
        records,
    })
}

fn block_at_time(time_us: u64, interval_us: u64) -> u64 {
    time_us / interval_us
}

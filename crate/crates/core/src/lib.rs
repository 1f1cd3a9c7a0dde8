//! Frontrunning-resistant transaction framework.
//!
//! A pending transaction on a public chain can be outbid the moment an
//! observer sees it. This crate implements a defense built from two
//! primitives: every submitter must evaluate a sequential delay function
//! before their transaction may enter the pool, and transaction details
//! stay hidden behind a digest until the delay has been served, with a
//! verifier committee attesting both steps via aggregate signatures.
//!
//! Modules:
//! - [`vdf`] — delay function: sequential evaluation, succinct proof,
//!   fast public verification.
//! - [`aggsig`] — pairing-based aggregate signatures with a
//!   distinct-message gate.
//! - [`protocol`] — actor state machines for the dApp creator, user,
//!   coordinator, and verifier committee.
//! - [`chainsim`] — deterministic discrete-event chain simulator with a
//!   fee market, greedy miner, contract-validation engine, and pluggable
//!   frontrunning adversaries.
//! - [`analytics`] — historical-trace ingestion, frontrun-probability
//!   grids, and epoch parameter recommendation.

pub mod aggsig;
pub mod analytics;
pub mod chainsim;
pub mod encoding;
pub mod primes;
pub mod protocol;
pub mod vdf;

//! Aggregate signatures over the BLS12-381 pairing.
//!
//! Secret keys are scalars, public keys live in G2, signatures in G1.
//! Signing hashes the message to G1 and raises it to the secret key;
//! aggregation multiplies signatures together. An aggregate over distinct
//! messages verifies through a single product-of-pairings equation.
//! Distinctness of the messages is checked, not assumed: a bundle with a
//! repeated message never verifies.

use bls12_381::hash_to_curve::{ExpandMsgXmd, HashToCurve};
use bls12_381::{multi_miller_loop, G1Affine, G1Projective, G2Affine, G2Prepared, Scalar};
use ff::Field;
use group::{Curve, Group};
use rand::RngCore;
use serde::{de::Error as DeError, Deserialize, Deserializer, Serialize, Serializer};
use std::collections::HashSet;

/// Domain separation tag for hashing messages onto the curve.
pub const DST: &[u8] = b"FIRST-AGGSIG-v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AggsigError {
    #[error("message and signature lists differ in length")]
    LengthMismatch,
    #[error("nothing to aggregate")]
    Empty,
}

/// Public verification key in G2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublicKey(pub(crate) G2Affine);

/// Signature (or aggregate of signatures) in G1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub(crate) G1Affine);

/// Signing/verification keypair. The public key is `g2^secret`.
#[derive(Debug, Clone)]
pub struct KeyPair {
    secret: Scalar,
    public: PublicKey,
}

fn hash_to_g1(message: &[u8]) -> G1Projective {
    <G1Projective as HashToCurve<ExpandMsgXmd<sha2::Sha256>>>::hash_to_curve(message, DST)
}

/// Samples a fresh keypair from the given RNG. Seeded RNGs give
/// reproducible keys.
pub fn keygen<R: RngCore + ?Sized>(rng: &mut R) -> KeyPair {
    let secret = Scalar::random(&mut *rng);
    let public = PublicKey(G2Affine::from(G2Affine::generator() * secret));
    KeyPair { secret, public }
}

impl KeyPair {
    pub fn public(&self) -> PublicKey {
        self.public
    }

    /// Big-endian secret scalar bytes, for key files.
    pub fn secret_bytes(&self) -> [u8; 32] {
        let mut le = self.secret.to_bytes();
        le.reverse();
        le
    }

    pub fn from_secret_bytes(be: &[u8; 32]) -> Option<KeyPair> {
        let mut le = *be;
        le.reverse();
        let secret = Option::<Scalar>::from(Scalar::from_bytes(&le))?;
        let public = PublicKey(G2Affine::from(G2Affine::generator() * secret));
        Some(KeyPair { secret, public })
    }
}

/// Signs a message: `σ = H(m)^x`. Deterministic per (key, message).
pub fn sign(keypair: &KeyPair, message: &[u8]) -> Signature {
    Signature(G1Affine::from(hash_to_g1(message) * keypair.secret))
}

/// Checks the pairing equation `e(σ, g2) = e(H(m), v)`.
pub fn verify(public: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    let h = hash_to_g1(message).to_affine();
    multi_miller_loop(&[
        (&-signature.0, &G2Prepared::from(G2Affine::generator())),
        (&h, &G2Prepared::from(public.0)),
    ])
    .final_exponentiation()
    .is_identity()
    .into()
}

/// Multiplies the signatures together in G1. Order-independent. The
/// message list is taken alongside to enforce the scheme's shape.
pub fn aggregate(messages: &[Vec<u8>], signatures: &[Signature]) -> Result<Signature, AggsigError> {
    if messages.len() != signatures.len() {
        return Err(AggsigError::LengthMismatch);
    }
    if signatures.is_empty() {
        return Err(AggsigError::Empty);
    }
    let sum = signatures
        .iter()
        .fold(G1Projective::identity(), |acc, s| acc + s.0);
    Ok(Signature(G1Affine::from(sum)))
}

/// An aggregate signature with its constituent messages and the matching
/// public keys, in the same order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedBundle {
    pub aggregate: Signature,
    #[serde(with = "hex_messages")]
    pub messages: Vec<Vec<u8>>,
    pub public_keys: Vec<PublicKey>,
}

impl SignedBundle {
    /// Assembles a bundle; lengths must match and be non-empty.
    pub fn new(
        aggregate: Signature,
        messages: Vec<Vec<u8>>,
        public_keys: Vec<PublicKey>,
    ) -> Result<Self, AggsigError> {
        if messages.len() != public_keys.len() {
            return Err(AggsigError::LengthMismatch);
        }
        if messages.is_empty() {
            return Err(AggsigError::Empty);
        }
        Ok(SignedBundle {
            aggregate,
            messages,
            public_keys,
        })
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

/// Verifies an aggregate: false if any two messages coincide, otherwise
/// the product-of-pairings equation `e(σ, g2) = Π e(H(m_i), v_i)`.
pub fn aggregate_verify(bundle: &SignedBundle) -> bool {
    if bundle.messages.len() != bundle.public_keys.len() || bundle.messages.is_empty() {
        return false;
    }
    let mut seen = HashSet::new();
    for message in &bundle.messages {
        if !seen.insert(message.as_slice()) {
            return false;
        }
    }

    let hashed: Vec<G1Affine> = bundle
        .messages
        .iter()
        .map(|m| hash_to_g1(m).to_affine())
        .collect();
    let prepared: Vec<G2Prepared> = bundle
        .public_keys
        .iter()
        .map(|pk| G2Prepared::from(pk.0))
        .collect();
    let neg_agg = -bundle.aggregate.0;
    let g2_gen = G2Prepared::from(G2Affine::generator());

    let mut terms: Vec<(&G1Affine, &G2Prepared)> = vec![(&neg_agg, &g2_gen)];
    terms.extend(hashed.iter().zip(prepared.iter()));
    multi_miller_loop(&terms)
        .final_exponentiation()
        .is_identity()
        .into()
}

impl PublicKey {
    pub fn to_bytes(&self) -> [u8; 96] {
        self.0.to_compressed()
    }

    pub fn from_bytes(bytes: &[u8; 96]) -> Option<PublicKey> {
        Option::<G2Affine>::from(G2Affine::from_compressed(bytes)).map(PublicKey)
    }
}

impl Signature {
    pub fn to_bytes(&self) -> [u8; 48] {
        self.0.to_compressed()
    }

    pub fn from_bytes(bytes: &[u8; 48]) -> Option<Signature> {
        Option::<G1Affine>::from(G1Affine::from_compressed(bytes)).map(Signature)
    }

    /// Arbitrary G1 element from an RNG; test probes use this to model a
    /// forger with no knowledge of any secret key.
    pub fn random_for_probe<R: RngCore + ?Sized>(rng: &mut R) -> Signature {
        Signature(G1Affine::from(G1Projective::random(rng)))
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        let bytes: [u8; 96] = hex::decode(&raw)
            .map_err(D::Error::custom)?
            .try_into()
            .map_err(|_| D::Error::custom("public key must be 96 bytes"))?;
        PublicKey::from_bytes(&bytes).ok_or_else(|| D::Error::custom("invalid G2 encoding"))
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        let bytes: [u8; 48] = hex::decode(&raw)
            .map_err(D::Error::custom)?
            .try_into()
            .map_err(|_| D::Error::custom("signature must be 48 bytes"))?;
        Signature::from_bytes(&bytes).ok_or_else(|| D::Error::custom("invalid G1 encoding"))
    }
}

mod hex_messages {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        let encoded: Vec<String> = v.iter().map(hex::encode).collect();
        serde::Serialize::serialize(&encoded, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.into_iter()
            .map(|s| hex::decode(s).map_err(D::Error::custom))
            .collect()
    }
}

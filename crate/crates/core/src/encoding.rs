//! Canonical wire encoding shared by every signed or hashed message.
//!
//! Every message is a tag followed by length-prefixed fields in a fixed
//! order: `u32` big-endian byte length, then the raw bytes. Integers are
//! big-endian, unsigned big integers use their minimal big-endian form.
//! Hashes and signatures over protocol messages are always computed over
//! this encoding, never over an ad-hoc serialization.

use num_bigint::BigUint;
use sha2::{Digest, Sha256};

/// Incremental builder for a canonical message.
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(tag: &str) -> Self {
        let mut enc = Encoder { buf: Vec::new() };
        enc.push_bytes(tag.as_bytes());
        enc
    }

    fn push_bytes(&mut self, bytes: &[u8]) {
        let len = u32::try_from(bytes.len()).expect("field longer than u32::MAX");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
    }

    pub fn bytes(mut self, bytes: &[u8]) -> Self {
        self.push_bytes(bytes);
        self
    }

    pub fn str(self, s: &str) -> Self {
        self.bytes(s.as_bytes())
    }

    pub fn u64(self, v: u64) -> Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn u32(self, v: u32) -> Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn biguint(self, v: &BigUint) -> Self {
        self.bytes(&v.to_bytes_be())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Sequential reader over a canonical message, mirroring [`Encoder`].
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("message truncated")]
    Truncated,
    #[error("expected tag {expected:?}")]
    TagMismatch { expected: String },
    #[error("field has wrong width")]
    BadWidth,
    #[error("field is not valid utf-8")]
    BadUtf8,
    #[error("trailing bytes after message")]
    TrailingBytes,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8], tag: &str) -> Result<Self, DecodeError> {
        let mut dec = Decoder { buf, pos: 0 };
        let got = dec.bytes()?;
        if got != tag.as_bytes() {
            return Err(DecodeError::TagMismatch {
                expected: tag.to_string(),
            });
        }
        Ok(dec)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < 4 {
            return Err(DecodeError::Truncated);
        }
        let mut len_bytes = [0u8; 4];
        len_bytes.copy_from_slice(&self.buf[self.pos..self.pos + 4]);
        let len = u32::from_be_bytes(len_bytes) as usize;
        self.pos += 4;
        if self.buf.len() - self.pos < len {
            return Err(DecodeError::Truncated);
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    pub fn str(&mut self) -> Result<String, DecodeError> {
        let raw = self.bytes()?;
        String::from_utf8(raw.to_vec()).map_err(|_| DecodeError::BadUtf8)
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        let raw = self.bytes()?;
        let arr: [u8; 8] = raw.try_into().map_err(|_| DecodeError::BadWidth)?;
        Ok(u64::from_be_bytes(arr))
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        let raw = self.bytes()?;
        let arr: [u8; 4] = raw.try_into().map_err(|_| DecodeError::BadWidth)?;
        Ok(u32::from_be_bytes(arr))
    }

    pub fn biguint(&mut self) -> Result<BigUint, DecodeError> {
        Ok(BigUint::from_bytes_be(self.bytes()?))
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(DecodeError::TrailingBytes)
        }
    }
}

/// SHA-256 of an already canonically encoded message.
pub fn digest(encoded: &[u8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    out.copy_from_slice(&Sha256::digest(encoded));
    out
}


/// Serde adapter: `BigUint` as a decimal string, for JSON artifacts.
pub mod biguint_dec {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let raw = String::deserialize(d)?;
        BigUint::parse_bytes(raw.as_bytes(), 10)
            .ok_or_else(|| D::Error::custom("invalid decimal integer"))
    }
}

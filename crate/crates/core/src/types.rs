//! Domain-wide identifier types.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hexfmt;

/// A 20-byte participant or contract identifier, derived from a secp256k1
/// public key by the standard keccak rule (or synthetically for simulated
/// contracts).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn from_hex(s: &str) -> Result<Self, String> {
        hexfmt::decode_array::<20>(s).map(Address)
    }

    pub fn to_hex(&self) -> String {
        hexfmt::encode(self.0)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", self.to_hex())
    }
}

impl Serialize for Address {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        Address::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// A 256-bit grant nonce, big-endian. Distinct from the 12-byte AEAD nonce.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Nonce256(pub [u8; 32]);

impl Nonce256 {
    pub fn from_u64(v: u64) -> Self {
        let mut b = [0u8; 32];
        b[24..].copy_from_slice(&v.to_be_bytes());
        Nonce256(b)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hexfmt::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, String> {
        hexfmt::decode_array::<32>(s).map(Nonce256)
    }
}

impl fmt::Debug for Nonce256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce256({})", self.to_hex())
    }
}

impl Serialize for Nonce256 {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Nonce256 {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        Nonce256::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

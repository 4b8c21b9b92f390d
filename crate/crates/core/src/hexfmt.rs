//! Canonical hex encoding: lowercase, `0x`-prefixed.
//!
//! All serialized binary fields (keys, digests, signatures, wrapped keys)
//! use this form, both in JSON exports and CLI output.

use serde::{Deserialize, Deserializer, Serializer};

/// Encodes bytes as `0x`-prefixed lowercase hex.
pub fn encode<B: AsRef<[u8]>>(bytes: B) -> String {
    format!("0x{}", hex::encode(bytes.as_ref()))
}

/// Decodes a hex string; the `0x` prefix is accepted but not required.
pub fn decode(s: &str) -> Result<Vec<u8>, hex::FromHexError> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    hex::decode(s)
}

/// Decodes into a fixed-size array, rejecting length mismatches.
pub fn decode_array<const N: usize>(s: &str) -> Result<[u8; N], String> {
    let bytes = decode(s).map_err(|e| e.to_string())?;
    let len = bytes.len();
    bytes
        .try_into()
        .map_err(|_| format!("expected {} bytes, got {}", N, len))
}

/// Serde adapter for `Vec<u8>` fields.
pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &Vec<u8>, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        decode(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for fixed-size byte arrays.
pub mod array {
    use super::*;

    pub fn serialize<S: Serializer, const N: usize>(
        bytes: &[u8; N],
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(
        de: D,
    ) -> Result<[u8; N], D::Error> {
        let s = String::deserialize(de)?;
        decode_array(&s).map_err(serde::de::Error::custom)
    }
}

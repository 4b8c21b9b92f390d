//! The signed grant package a patient hands to a grantee.
//!
//! This is the off-ledger artifact of Workflow 2: the grantee submits it
//! (and pays the gas). JSON field names are part of the interchange format.

use serde::{Deserialize, Serialize};

use crate::crypto::Signature;
use crate::hexfmt;
use crate::types::{Address, Nonce256};

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct GrantPackage {
    pub rid: u64,
    pub grantee: Address,
    pub expiration: u64,
    #[serde(rename = "wrappedKey", with = "hexfmt::vec")]
    pub wrapped_key: Vec<u8>,
    pub nonce: Nonce256,
    #[serde(with = "sig_hex")]
    pub signature: Signature,
}

impl GrantPackage {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("package serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Signatures travel as one 65-byte `r || s || v` hex string.
mod sig_hex {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(sig: &Signature, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&sig.to_hex())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Signature, D::Error> {
        let s = String::deserialize(de)?;
        let bytes = hexfmt::decode(&s).map_err(serde::de::Error::custom)?;
        Signature::from_bytes(&bytes).map_err(serde::de::Error::custom)
    }
}

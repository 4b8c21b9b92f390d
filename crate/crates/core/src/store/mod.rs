//! Content-addressed storage for encrypted envelopes.
//!
//! The canonical blob layout is `len(C) || C || T || N || len(AD) || AD`
//! with u32 big-endian length prefixes; `T` and `N` are fixed width. The
//! locator is the SHA-256 of those serialized bytes, so identical envelopes
//! always land at the same pointer. Note this is a different hash from the
//! on-ledger content digest, which covers the bare concatenation
//! `C || T || N || AD`.

mod fs;
mod memory;

pub use fs::FsStore;
pub use memory::MemoryStore;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::crypto::{EncryptedEnvelope, GCM_NONCE_LEN, GCM_TAG_LEN};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("blob not found: {0}")]
    NotFound(String),
    #[error("malformed pointer: {0}")]
    BadPointer(String),
    #[error("blob deserialization failed: {0}")]
    Corrupt(String),
    #[error("storage I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Pointer scheme; both shipped schemes are content-addressed.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Mem,
    File,
}

impl Scheme {
    fn as_str(&self) -> &'static str {
        match self {
            Scheme::Mem => "mem",
            Scheme::File => "file",
        }
    }
}

/// `<scheme>://<hex locator>`. For content-addressed schemes the locator is
/// the SHA-256 of the stored bytes.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct StoragePointer {
    pub scheme: Scheme,
    pub locator: String,
}

impl StoragePointer {
    pub fn parse(s: &str) -> Result<Self, StoreError> {
        let (scheme, locator) = s
            .split_once("://")
            .ok_or_else(|| StoreError::BadPointer(s.to_string()))?;
        let scheme = match scheme {
            "mem" => Scheme::Mem,
            "file" => Scheme::File,
            _ => return Err(StoreError::BadPointer(s.to_string())),
        };
        if locator.is_empty() || !locator.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(StoreError::BadPointer(s.to_string()));
        }
        Ok(StoragePointer {
            scheme,
            locator: locator.to_string(),
        })
    }
}

impl fmt::Display for StoragePointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}://{}", self.scheme.as_str(), self.locator)
    }
}

/// Serializes an envelope into the canonical blob bytes.
pub fn serialize_envelope(envelope: &EncryptedEnvelope) -> Vec<u8> {
    let mut out = Vec::with_capacity(
        8 + envelope.ciphertext.len() + GCM_TAG_LEN + GCM_NONCE_LEN + envelope.associated_data.len(),
    );
    out.extend_from_slice(&(envelope.ciphertext.len() as u32).to_be_bytes());
    out.extend_from_slice(&envelope.ciphertext);
    out.extend_from_slice(&envelope.tag);
    out.extend_from_slice(&envelope.nonce);
    out.extend_from_slice(&(envelope.associated_data.len() as u32).to_be_bytes());
    out.extend_from_slice(&envelope.associated_data);
    out
}

/// Parses canonical blob bytes back into an envelope. Rejects trailing
/// garbage so the encoding stays one-to-one.
pub fn deserialize_envelope(bytes: &[u8]) -> Result<EncryptedEnvelope, StoreError> {
    let too_short = || StoreError::Corrupt("truncated blob".into());
    let mut at = 0usize;
    let take = |at: &mut usize, n: usize| -> Result<&[u8], StoreError> {
        let end = at.checked_add(n).ok_or_else(too_short)?;
        if end > bytes.len() {
            return Err(too_short());
        }
        let s = &bytes[*at..end];
        *at = end;
        Ok(s)
    };

    let c_len = u32::from_be_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
    let ciphertext = take(&mut at, c_len)?.to_vec();
    let tag: [u8; GCM_TAG_LEN] = take(&mut at, GCM_TAG_LEN)?.try_into().unwrap();
    let nonce: [u8; GCM_NONCE_LEN] = take(&mut at, GCM_NONCE_LEN)?.try_into().unwrap();
    let ad_len = u32::from_be_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
    let associated_data = take(&mut at, ad_len)?.to_vec();
    if at != bytes.len() {
        return Err(StoreError::Corrupt(format!(
            "{} trailing bytes",
            bytes.len() - at
        )));
    }
    Ok(EncryptedEnvelope {
        ciphertext,
        tag,
        nonce,
        associated_data,
    })
}

/// SHA-256 locator over serialized blob bytes.
pub fn locator_for(blob: &[u8]) -> String {
    hex::encode(Sha256::digest(blob))
}

/// Off-chain storage behind one interface. Implementations are safe for
/// concurrent `put`/`get`; `delete` linearizes with `put` on the same
/// locator.
pub trait BlobStore: Send + Sync {
    /// Persists an envelope and returns its pointer. Idempotent for
    /// identical envelopes in content-addressed schemes.
    fn put(&self, envelope: &EncryptedEnvelope) -> Result<StoragePointer, StoreError>;

    /// Fetches and deserializes the envelope at `ptr`.
    fn get(&self, ptr: &StoragePointer) -> Result<EncryptedEnvelope, StoreError>;

    /// Removes the blob; returns whether anything was deleted.
    fn delete(&self, ptr: &StoragePointer) -> Result<bool, StoreError>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::AD_MINIMAL;

    fn envelope() -> EncryptedEnvelope {
        EncryptedEnvelope {
            ciphertext: vec![1, 2, 3, 4, 5],
            tag: [7; GCM_TAG_LEN],
            nonce: [9; GCM_NONCE_LEN],
            associated_data: AD_MINIMAL.to_vec(),
        }
    }

    #[test]
    fn serialization_round_trips_and_is_canonical() {
        let env = envelope();
        let bytes = serialize_envelope(&env);
        assert_eq!(deserialize_envelope(&bytes).unwrap(), env);
        assert_eq!(serialize_envelope(&deserialize_envelope(&bytes).unwrap()), bytes);
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = serialize_envelope(&envelope());
        bytes.push(0);
        assert!(matches!(
            deserialize_envelope(&bytes),
            Err(StoreError::Corrupt(_))
        ));
    }

    #[test]
    fn truncation_rejected() {
        let bytes = serialize_envelope(&envelope());
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(deserialize_envelope(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn pointer_text_round_trip() {
        let p = StoragePointer {
            scheme: Scheme::Mem,
            locator: "abcd12".into(),
        };
        assert_eq!(p.to_string(), "mem://abcd12");
        assert_eq!(StoragePointer::parse("mem://abcd12").unwrap(), p);
        assert!(StoragePointer::parse("s3://abcd12").is_err());
        assert!(StoragePointer::parse("mem://").is_err());
        assert!(StoragePointer::parse("mem://xyz").is_err());
        assert!(StoragePointer::parse("nonsense").is_err());
    }
}

//! Cryptographic primitives, composed exactly as the protocol requires.
//!
//! * AES-256-GCM envelopes with a minimal, constant associated-data field.
//! * SHA-256 composite digests over `C || T || N || AD`.
//! * ECIES key wrapping on secp256k1 (X9.63 KDF, AES-128-CTR DEM,
//!   HMAC-SHA-256), eth-crypto compatible layout.
//! * EIP-712 style typed-data hashing, ECDSA signing and recovery with
//!   low-s enforcement.
//!
//! Everything here is pure or takes an explicit entropy source, so the
//! module is safe to use concurrently without shared state.

mod aead;
mod ecies;
mod keys;
mod signature;
mod typed_data;

pub use aead::{
    decrypt_record, encrypt_record, encrypt_record_with_nonce, generate_symmetric_key,
    EncryptedEnvelope, SymmetricKey, AD_MINIMAL, GCM_NONCE_LEN, GCM_TAG_LEN,
};
pub use ecies::{unwrap_key, wrap_key, wrap_key_with_parts, WrappedKey};
pub use keys::{keccak256, public_key_to_address, KeyPair, PublicKey};
pub use signature::{recover_signer, sign_digest, Signature};
pub use typed_data::{
    hash_typed_emergency, hash_typed_permission, EmergencyRequestMessage, PermissionMessage,
    TypedDataDomain, EMERGENCY_REQUEST_TYPE, PERMISSION_TYPE,
};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hexfmt;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    /// The entropy source failed; no key or nonce material was produced.
    #[error("entropy source failure: {0}")]
    Entropy(String),
    /// AEAD tag verification failed. Indistinguishable between a wrong key
    /// and tampered data by construction.
    #[error("authentication failed")]
    AuthenticationFailed,
    /// ECIES MAC did not verify.
    #[error("wrapped key integrity check failed")]
    MacMismatch,
    /// A byte string did not parse as the expected structure.
    #[error("malformed input: {0}")]
    Malformed(String),
    /// A public key was not a valid curve point.
    #[error("invalid public key")]
    InvalidPublicKey,
    /// A signature was rejected: bad recovery id, out-of-range scalar, or
    /// non-canonical high-s form.
    #[error("invalid signature: {0}")]
    InvalidSignature(String),
}

/// SHA-256 content digest of a stored envelope: `SHA-256(C || T || N || AD)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContentDigest(pub [u8; 32]);

impl ContentDigest {
    pub const ZERO: ContentDigest = ContentDigest([0u8; 32]);

    pub fn to_hex(&self) -> String {
        hexfmt::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, String> {
        hexfmt::decode_array::<32>(s).map(ContentDigest)
    }
}

impl std::fmt::Debug for ContentDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ContentDigest({})", self.to_hex())
    }
}

impl serde::Serialize for ContentDigest {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_hex())
    }
}

impl<'de> serde::Deserialize<'de> for ContentDigest {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        ContentDigest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Computes the composite digest `SHA-256(C || T || N || AD)` over the exact
/// byte concatenation, in that order.
pub fn compute_digest(envelope: &EncryptedEnvelope) -> ContentDigest {
    let mut hasher = Sha256::new();
    hasher.update(&envelope.ciphertext);
    hasher.update(envelope.tag);
    hasher.update(envelope.nonce);
    hasher.update(&envelope.associated_data);
    ContentDigest(hasher.finalize().into())
}

/// Plain SHA-256, used for access-receipt detail hashes.
pub fn sha256(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}

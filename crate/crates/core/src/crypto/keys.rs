//! secp256k1 key pairs and address derivation.

use k256::elliptic_curve::rand_core::CryptoRngCore;
use k256::elliptic_curve::sec1::ToEncodedPoint;
use sha3::{Digest, Keccak256};

use super::CryptoError;
use crate::types::Address;

/// Keccak-256, used for typed-data hashing and address derivation.
pub fn keccak256(data: &[u8]) -> [u8; 32] {
    Keccak256::digest(data).into()
}

/// A validated secp256k1 public point. Always encodes uncompressed with the
/// 0x04 prefix.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct PublicKey(k256::PublicKey);

impl PublicKey {
    /// Parses a 65-byte uncompressed SEC1 encoding. Rejects wrong lengths,
    /// missing 0x04 prefix, off-curve coordinates, and the identity.
    pub fn from_uncompressed(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != 65 || bytes[0] != 0x04 {
            return Err(CryptoError::InvalidPublicKey);
        }
        k256::PublicKey::from_sec1_bytes(bytes)
            .map(PublicKey)
            .map_err(|_| CryptoError::InvalidPublicKey)
    }

    pub fn to_uncompressed(&self) -> [u8; 65] {
        let point = self.0.to_encoded_point(false);
        point.as_bytes().try_into().expect("uncompressed length")
    }

    /// The 20-byte address: last 20 bytes of keccak256 over the 64
    /// coordinate bytes (prefix stripped).
    pub fn to_address(&self) -> Address {
        let encoded = self.to_uncompressed();
        let hash = keccak256(&encoded[1..]);
        let mut addr = [0u8; 20];
        addr.copy_from_slice(&hash[12..]);
        Address(addr)
    }

    pub(crate) fn inner(&self) -> &k256::PublicKey {
        &self.0
    }
}

/// Standard address rule applied to a public key.
pub fn public_key_to_address(public: &PublicKey) -> Address {
    public.to_address()
}

/// A secp256k1 key pair used for both signing and encryption roles
/// (participants hold one of each).
#[derive(Clone)]
pub struct KeyPair {
    secret: k256::SecretKey,
}

impl KeyPair {
    pub fn generate(rng: &mut impl CryptoRngCore) -> Self {
        KeyPair {
            secret: k256::SecretKey::random(rng),
        }
    }

    /// Reconstructs a key pair from a 32-byte scalar. Rejects zero and
    /// out-of-range values.
    pub fn from_secret_bytes(bytes: &[u8; 32]) -> Result<Self, CryptoError> {
        k256::SecretKey::from_slice(bytes)
            .map(|secret| KeyPair { secret })
            .map_err(|_| CryptoError::Malformed("invalid secret scalar".into()))
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret.to_bytes().into()
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.secret.public_key())
    }

    pub fn address(&self) -> Address {
        self.public().to_address()
    }

    pub(crate) fn secret(&self) -> &k256::SecretKey {
        &self.secret
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeyPair(address={})", self.address())
    }
}

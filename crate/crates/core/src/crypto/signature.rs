//! ECDSA signing and signer recovery over 32-byte digests.
//!
//! Signatures are produced and accepted only in low-s canonical form;
//! the high-s twin of any signature is rejected on recovery.

use k256::ecdsa::{RecoveryId, Signature as EcdsaSignature, SigningKey, VerifyingKey};
use k256::elliptic_curve::scalar::IsHigh;
use serde::{Deserialize, Serialize};

use super::keys::{KeyPair, PublicKey};
use super::CryptoError;
use crate::hexfmt;
use crate::types::Address;

/// A recoverable ECDSA signature: `(r, s)` scalars plus a recovery id of
/// 0 or 1.
#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    #[serde(with = "hexfmt::array")]
    pub r: [u8; 32],
    #[serde(with = "hexfmt::array")]
    pub s: [u8; 32],
    pub v: u8,
}

impl Signature {
    /// 65-byte `r || s || v` encoding.
    pub fn to_bytes(&self) -> [u8; 65] {
        let mut out = [0u8; 65];
        out[..32].copy_from_slice(&self.r);
        out[32..64].copy_from_slice(&self.s);
        out[64] = self.v;
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != 65 {
            return Err(CryptoError::Malformed(format!(
                "signature must be 65 bytes, got {}",
                bytes.len()
            )));
        }
        Ok(Signature {
            r: bytes[..32].try_into().unwrap(),
            s: bytes[32..64].try_into().unwrap(),
            v: bytes[64],
        })
    }

    pub fn to_hex(&self) -> String {
        hexfmt::encode(self.to_bytes())
    }
}

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

/// Signs a 32-byte digest, returning a low-s normalized recoverable
/// signature.
pub fn sign_digest(keypair: &KeyPair, digest: &[u8; 32]) -> Signature {
    let signing = SigningKey::from(keypair.secret());
    let (sig, recid) = signing
        .sign_prehash_recoverable(digest)
        .expect("signing a 32-byte digest cannot fail");
    let bytes = sig.to_bytes();
    Signature {
        r: bytes[..32].try_into().unwrap(),
        s: bytes[32..].try_into().unwrap(),
        v: recid.to_byte(),
    }
}

/// Recovers the signer address. Rejects out-of-range scalars, unknown
/// recovery ids, and non-canonical (high-s) signatures.
pub fn recover_signer(digest: &[u8; 32], signature: &Signature) -> Result<Address, CryptoError> {
    if signature.v > 1 {
        return Err(CryptoError::InvalidSignature(format!(
            "recovery id {} out of range",
            signature.v
        )));
    }
    let mut compact = [0u8; 64];
    compact[..32].copy_from_slice(&signature.r);
    compact[32..].copy_from_slice(&signature.s);
    let sig = EcdsaSignature::from_slice(&compact)
        .map_err(|_| CryptoError::InvalidSignature("r or s out of range".into()))?;
    if sig.s().is_high().into() {
        return Err(CryptoError::InvalidSignature(
            "high-s signature rejected".into(),
        ));
    }
    let recid = RecoveryId::from_byte(signature.v)
        .ok_or_else(|| CryptoError::InvalidSignature("bad recovery id".into()))?;
    let verifying = VerifyingKey::recover_from_prehash(digest, &sig, recid)
        .map_err(|_| CryptoError::InvalidSignature("recovery failed".into()))?;
    let public = PublicKey::from_uncompressed(
        verifying.to_encoded_point(false).as_bytes(),
    )?;
    Ok(public.to_address())
}

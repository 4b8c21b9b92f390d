//! ECIES key wrapping on secp256k1.
//!
//! Configuration: ephemeral ECDH, ANSI X9.63 KDF with SHA-256, AES-128-CTR
//! as the DEM, HMAC-SHA-256 over `IV || ciphertext`. The 48-byte KDF output
//! splits into a 16-byte DEM key and a 32-byte MAC key. Wire layout is
//! `ephemeral_public(65) || iv(16) || ciphertext || mac(32)`, the common
//! eth-crypto-compatible shape.

use aes::cipher::{KeyIvInit, StreamCipher};
use hmac::{Hmac, Mac};
use k256::elliptic_curve::rand_core::CryptoRngCore;
use rand::RngCore;
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;

use super::aead::SymmetricKey;
use super::keys::{KeyPair, PublicKey};
use super::CryptoError;
use crate::hexfmt;

type Aes128Ctr = ctr::Ctr128BE<aes::Aes128>;
type HmacSha256 = Hmac<Sha256>;

const EPHEMERAL_LEN: usize = 65;
const IV_LEN: usize = 16;
const MAC_LEN: usize = 32;
const DEM_KEY_LEN: usize = 16;
const MAC_KEY_LEN: usize = 32;

/// An ECIES ciphertext carrying a wrapped record key.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WrappedKey {
    pub ephemeral_public: [u8; EPHEMERAL_LEN],
    pub iv: [u8; IV_LEN],
    pub ciphertext: Vec<u8>,
    pub mac: [u8; MAC_LEN],
}

impl WrappedKey {
    /// `ephemeral_public || iv || ciphertext || mac`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(EPHEMERAL_LEN + IV_LEN + self.ciphertext.len() + MAC_LEN);
        out.extend_from_slice(&self.ephemeral_public);
        out.extend_from_slice(&self.iv);
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.mac);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < EPHEMERAL_LEN + IV_LEN + MAC_LEN + 1 {
            return Err(CryptoError::Malformed(format!(
                "wrapped key too short: {} bytes",
                bytes.len()
            )));
        }
        let ct_end = bytes.len() - MAC_LEN;
        Ok(WrappedKey {
            ephemeral_public: bytes[..EPHEMERAL_LEN].try_into().unwrap(),
            iv: bytes[EPHEMERAL_LEN..EPHEMERAL_LEN + IV_LEN].try_into().unwrap(),
            ciphertext: bytes[EPHEMERAL_LEN + IV_LEN..ct_end].to_vec(),
            mac: bytes[ct_end..].try_into().unwrap(),
        })
    }

    pub fn to_hex(&self) -> String {
        hexfmt::encode(self.to_bytes())
    }

    /// keccak256 over the serialized bytes; this is what grant signatures
    /// commit to.
    pub fn commitment(&self) -> [u8; 32] {
        super::keys::keccak256(&self.to_bytes())
    }
}

/// ANSI X9.63 KDF with SHA-256 and empty shared info.
fn x963_kdf(shared: &[u8], out_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(out_len);
    let mut counter: u32 = 1;
    while out.len() < out_len {
        let mut hasher = Sha256::new();
        hasher.update(shared);
        hasher.update(counter.to_be_bytes());
        out.extend_from_slice(&hasher.finalize());
        counter += 1;
    }
    out.truncate(out_len);
    out
}

fn derive_keys(shared_x: &[u8]) -> ([u8; DEM_KEY_LEN], [u8; MAC_KEY_LEN]) {
    let okm = x963_kdf(shared_x, DEM_KEY_LEN + MAC_KEY_LEN);
    let mut dem = [0u8; DEM_KEY_LEN];
    let mut mac = [0u8; MAC_KEY_LEN];
    dem.copy_from_slice(&okm[..DEM_KEY_LEN]);
    mac.copy_from_slice(&okm[DEM_KEY_LEN..]);
    (dem, mac)
}

fn compute_mac(mac_key: &[u8; MAC_KEY_LEN], iv: &[u8; IV_LEN], ct: &[u8]) -> [u8; MAC_LEN] {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(mac_key).expect("any key length works");
    mac.update(iv);
    mac.update(ct);
    mac.finalize().into_bytes().into()
}

/// Wraps a record key for a recipient, drawing a fresh ephemeral key pair
/// and IV from the CSPRNG.
pub fn wrap_key(
    recipient_public: &PublicKey,
    key: &SymmetricKey,
    rng: &mut (impl CryptoRngCore + RngCore),
) -> Result<WrappedKey, CryptoError> {
    let ephemeral = KeyPair::generate(rng);
    let mut iv = [0u8; IV_LEN];
    rng.try_fill_bytes(&mut iv)
        .map_err(|e| CryptoError::Entropy(e.to_string()))?;
    wrap_key_with_parts(recipient_public, key, &ephemeral, iv)
}

/// Deterministic wrap with caller-supplied ephemeral key and IV, for vector
/// checks and replay tests. Production callers use [`wrap_key`].
pub fn wrap_key_with_parts(
    recipient_public: &PublicKey,
    key: &SymmetricKey,
    ephemeral: &KeyPair,
    iv: [u8; IV_LEN],
) -> Result<WrappedKey, CryptoError> {
    let shared = k256::ecdh::diffie_hellman(
        ephemeral.secret().to_nonzero_scalar(),
        recipient_public.inner().as_affine(),
    );
    let (dem_key, mac_key) = derive_keys(shared.raw_secret_bytes().as_slice());

    let mut ciphertext = key.as_bytes().to_vec();
    Aes128Ctr::new(&dem_key.into(), &iv.into()).apply_keystream(&mut ciphertext);
    let mac = compute_mac(&mac_key, &iv, &ciphertext);

    Ok(WrappedKey {
        ephemeral_public: ephemeral.public().to_uncompressed(),
        iv,
        ciphertext,
        mac,
    })
}

/// Unwraps a record key. The MAC is verified (in constant time) before any
/// decryption happens.
pub fn unwrap_key(
    recipient: &KeyPair,
    wrapped: &WrappedKey,
) -> Result<SymmetricKey, CryptoError> {
    let ephemeral = PublicKey::from_uncompressed(&wrapped.ephemeral_public)
        .map_err(|_| CryptoError::Malformed("bad ephemeral point".into()))?;
    let shared = k256::ecdh::diffie_hellman(
        recipient.secret().to_nonzero_scalar(),
        ephemeral.inner().as_affine(),
    );
    let (dem_key, mac_key) = derive_keys(shared.raw_secret_bytes().as_slice());

    let expected = compute_mac(&mac_key, &wrapped.iv, &wrapped.ciphertext);
    if expected.ct_eq(&wrapped.mac).unwrap_u8() != 1 {
        return Err(CryptoError::MacMismatch);
    }

    if wrapped.ciphertext.len() != 32 {
        return Err(CryptoError::Malformed(format!(
            "wrapped payload is {} bytes, expected 32",
            wrapped.ciphertext.len()
        )));
    }
    let mut plaintext = wrapped.ciphertext.clone();
    Aes128Ctr::new(&dem_key.into(), &wrapped.iv.into()).apply_keystream(&mut plaintext);
    Ok(SymmetricKey::from_bytes(plaintext.try_into().unwrap()))
}

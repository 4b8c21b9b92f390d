//! Institutional guardian service.
//!
//! A hospital-scale stand-in for an HSM-backed key service: it holds one
//! institutional encryption key plus a staff roster, and re-wraps record
//! keys for individual clinicians on demand. The record key exists in
//! plaintext only inside [`GuardianService::rewrap_for`]; everything that
//! crosses the boundary is an ECIES ciphertext. This keeps on-ledger grants
//! at one per institution regardless of staff count.

use std::collections::{BTreeMap, BTreeSet};

use k256::elliptic_curve::rand_core::CryptoRngCore;
use rand::RngCore;

use super::ClientError;
use crate::crypto::{unwrap_key, wrap_key, KeyPair, PublicKey, WrappedKey};
use crate::registry::KeyRegistry;
use crate::types::Address;

pub struct GuardianService {
    keypair: KeyPair,
    staff: BTreeSet<Address>,
    /// Pre-established envelope wraps, keyed by `(ledger, rid)`.
    envelope_keys: BTreeMap<(Address, u64), WrappedKey>,
}

impl GuardianService {
    pub fn new(rng: &mut impl CryptoRngCore) -> Self {
        GuardianService::from_keypair(KeyPair::generate(rng))
    }

    pub fn from_keypair(keypair: KeyPair) -> Self {
        GuardianService {
            keypair,
            staff: BTreeSet::new(),
            envelope_keys: BTreeMap::new(),
        }
    }

    /// The institutional encryption key that patients wrap record keys for.
    pub fn public(&self) -> PublicKey {
        self.keypair.public()
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn add_staff(&mut self, clinician: Address) {
        self.staff.insert(clinician);
    }

    pub fn remove_staff(&mut self, clinician: Address) {
        self.staff.remove(&clinician);
    }

    pub fn is_staff(&self, clinician: Address) -> bool {
        self.staff.contains(&clinician)
    }

    pub fn staff(&self) -> impl Iterator<Item = &Address> {
        self.staff.iter()
    }

    /// Called at record creation / rotation when the patient has this
    /// guardian configured.
    pub fn store_envelope_key(&mut self, ledger: Address, rid: u64, wrapped: WrappedKey) {
        self.envelope_keys.insert((ledger, rid), wrapped);
    }

    pub fn has_envelope_key(&self, ledger: Address, rid: u64) -> bool {
        self.envelope_keys.contains_key(&(ledger, rid))
    }

    pub fn envelope_keys(&self) -> impl Iterator<Item = (&(Address, u64), &WrappedKey)> {
        self.envelope_keys.iter()
    }

    /// Unwraps the record key and immediately re-wraps it under the
    /// requesting clinician's current registry key. Refuses non-staff; the
    /// plaintext key never leaves this call.
    pub fn rewrap_for(
        &self,
        requesting_clinician: Address,
        ledger: Address,
        rid: u64,
        registry: &KeyRegistry,
        rng: &mut (impl CryptoRngCore + RngCore),
    ) -> Result<WrappedKey, ClientError> {
        if !self.is_staff(requesting_clinician) {
            return Err(ClientError::NotGuardianStaff(requesting_clinician));
        }
        let envelope = self
            .envelope_keys
            .get(&(ledger, rid))
            .ok_or_else(|| ClientError::KeyUnavailable(format!(
                "guardian holds no envelope key for record {} on ledger {}",
                rid, ledger
            )))?;
        let symm = unwrap_key(&self.keypair, envelope)?;
        let (clinician_key, _) = registry.get_public_key(requesting_clinician)?;
        Ok(wrap_key(&clinician_key, &symm, rng)?)
    }
}

impl std::fmt::Debug for GuardianService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GuardianService")
            .field("address", &self.keypair.address())
            .field("staff", &self.staff.len())
            .field("envelope_keys", &self.envelope_keys.len())
            .finish()
    }
}

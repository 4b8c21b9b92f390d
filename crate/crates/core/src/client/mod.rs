//! Client-side protocol workflows.
//!
//! An [`Actor`] owns its key material and drives the workflows against a
//! ledger, registry, and blob store: record creation, permission grants,
//! record access (digest verified before any decryption), revocation, and
//! rotation, plus the two-physician emergency path through an institutional
//! guardian. Private keys never leave the actor; record keys leave only as
//! ECIES ciphertexts.

mod guardian;
mod package;

pub use guardian::GuardianService;
pub use package::GrantPackage;

use std::collections::{BTreeMap, BTreeSet};

use k256::elliptic_curve::rand_core::CryptoRngCore;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    compute_digest, decrypt_record, encrypt_record, generate_symmetric_key, hash_typed_emergency,
    hash_typed_permission, keccak256, sha256, sign_digest, unwrap_key, wrap_key, ContentDigest,
    CryptoError, EmergencyRequestMessage, KeyPair, PermissionMessage, SymmetricKey, WrappedKey,
    AD_MINIMAL,
};
use crate::ledger::{LedgerError, PatientLedger};
use crate::registry::{KeyRegistry, RegistryError};
use crate::store::{BlobStore, StoragePointer, StoreError};
use crate::types::{Address, Nonce256};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{0}")]
    Crypto(#[from] CryptoError),
    #[error("{0}")]
    Registry(#[from] RegistryError),
    #[error("{0}")]
    Ledger(#[from] LedgerError),
    #[error("{0}")]
    Store(#[from] StoreError),
    /// The stored blob does not match the registered digest. Raised before
    /// any decryption is attempted; distinct from an authentication failure.
    #[error("content digest mismatch: ledger has {}, blob hashes to {}", expected.to_hex(), actual.to_hex())]
    DigestMismatch {
        expected: ContentDigest,
        actual: ContentDigest,
    },
    #[error("record key unavailable: {0}")]
    KeyUnavailable(String),
    #[error("clinician {0} is not on the guardian staff roster")]
    NotGuardianStaff(Address),
}

/// Participant role, informational.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Patient,
    Provider,
    Physician,
    Guardian,
}

/// Observable steps of an access, in execution order. Tests hook this to
/// assert that decryption never runs on a digest-mismatched blob.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AccessStep {
    MetadataFetched,
    BlobFetched,
    DigestVerified,
    DigestRejected,
    KeyUnwrapped,
    Decrypted,
}

/// A protocol participant: signing identity, encryption key, local record
/// key cache, and the nonce journal that guards against accidental reuse.
pub struct Actor {
    role: Role,
    signing: KeyPair,
    encryption: KeyPair,
    /// Rotated-out encryption keys, retained for historical unwraps.
    retired_encryption: Vec<KeyPair>,
    /// Record keys this actor holds, keyed by (ledger, rid).
    key_cache: BTreeMap<(Address, u64), SymmetricKey>,
    /// Issued-but-unconfirmed grant nonces; entries persist until the grant
    /// is seen on-ledger.
    nonce_journal: BTreeSet<[u8; 32]>,
    /// Nonces confirmed consumed on-ledger. Never re-drawn.
    nonces_consumed: BTreeSet<[u8; 32]>,
}

/// Result of Workflow 1.
#[derive(Clone, Debug)]
pub struct CreatedRecord {
    pub rid: u64,
    pub ptr: StoragePointer,
    pub digest: ContentDigest,
}

/// Result of Workflow 5.
#[derive(Debug)]
pub struct RotationOutcome {
    pub ptr: StoragePointer,
    pub digest: ContentDigest,
    /// Fresh grant packages for the grantees the patient kept; each needs
    /// grantee submission like any other grant.
    pub packages: Vec<GrantPackage>,
}

/// Result of the emergency workflow.
#[derive(Debug)]
pub struct EmergencyOutcome {
    pub grant_id: [u8; 32],
    pub plaintext1: Vec<u8>,
    pub plaintext2: Vec<u8>,
}

impl Actor {
    pub fn new(role: Role, rng: &mut impl CryptoRngCore) -> Self {
        Actor {
            role,
            signing: KeyPair::generate(rng),
            encryption: KeyPair::generate(rng),
            retired_encryption: Vec::new(),
            key_cache: BTreeMap::new(),
            nonce_journal: BTreeSet::new(),
            nonces_consumed: BTreeSet::new(),
        }
    }

    /// Rebuilds an actor from persisted key material.
    pub fn from_parts(
        role: Role,
        signing: KeyPair,
        encryption: KeyPair,
        retired_encryption: Vec<KeyPair>,
        nonce_journal: BTreeSet<[u8; 32]>,
        nonces_consumed: BTreeSet<[u8; 32]>,
    ) -> Self {
        Actor {
            role,
            signing,
            encryption,
            retired_encryption,
            key_cache: BTreeMap::new(),
            nonce_journal,
            nonces_consumed,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// The actor's on-ledger identity, derived from the signing key.
    pub fn address(&self) -> Address {
        self.signing.address()
    }

    pub fn signing_keypair(&self) -> &KeyPair {
        &self.signing
    }

    pub fn encryption_keypair(&self) -> &KeyPair {
        &self.encryption
    }

    pub fn retired_encryption_keypairs(&self) -> &[KeyPair] {
        &self.retired_encryption
    }

    pub fn nonce_journal(&self) -> &BTreeSet<[u8; 32]> {
        &self.nonce_journal
    }

    pub fn nonces_consumed(&self) -> &BTreeSet<[u8; 32]> {
        &self.nonces_consumed
    }

    pub fn cached_key(&self, ledger: Address, rid: u64) -> Option<&SymmetricKey> {
        self.key_cache.get(&(ledger, rid))
    }

    pub fn cache_key(&mut self, ledger: Address, rid: u64, key: SymmetricKey) {
        self.key_cache.insert((ledger, rid), key);
    }

    /// Publishes the encryption public key in the registry.
    pub fn register_encryption_key(
        &self,
        registry: &mut KeyRegistry,
    ) -> Result<u64, ClientError> {
        Ok(registry.register_key(self.address(), &self.encryption.public().to_uncompressed())?)
    }

    /// Replaces the encryption key pair and rotates it in the registry. The
    /// old key is retired locally so historical wraps stay decryptable.
    pub fn rotate_encryption_key(
        &mut self,
        registry: &mut KeyRegistry,
        rng: &mut impl CryptoRngCore,
    ) -> Result<u64, ClientError> {
        let fresh = KeyPair::generate(rng);
        let version = registry.rotate_key(self.address(), &fresh.public().to_uncompressed())?;
        let old = std::mem::replace(&mut self.encryption, fresh);
        self.retired_encryption.push(old);
        Ok(version)
    }

    /// Draws a fresh 256-bit nonce, skipping anything already issued or
    /// consumed, and journals it. The journal survives restarts so a crash
    /// between package creation and submission can never lead to reuse.
    pub fn next_nonce(&mut self, rng: &mut dyn RngCore) -> Result<Nonce256, ClientError> {
        loop {
            let mut bytes = [0u8; 32];
            rng.try_fill_bytes(&mut bytes)
                .map_err(|e| ClientError::Crypto(CryptoError::Entropy(e.to_string())))?;
            if !self.nonce_journal.contains(&bytes) && !self.nonces_consumed.contains(&bytes) {
                self.nonce_journal.insert(bytes);
                return Ok(Nonce256(bytes));
            }
        }
    }

    /// Moves a nonce from the journal to the consumed set once its grant is
    /// confirmed on-ledger.
    pub fn mark_nonce_confirmed(&mut self, nonce: Nonce256) {
        self.nonce_journal.remove(nonce.as_bytes());
        self.nonces_consumed.insert(*nonce.as_bytes());
    }

    /// Workflow 1: encrypt, store, digest, wrap for self (and guardian when
    /// configured), then register on the ledger. The ledger call comes
    /// last, so any earlier failure leaves it untouched.
    pub fn create_record(
        &mut self,
        ledger: &mut PatientLedger,
        registry: &KeyRegistry,
        store: &dyn BlobStore,
        plaintext: &[u8],
        guardian: Option<&mut GuardianService>,
        rng: &mut (impl CryptoRngCore + RngCore),
    ) -> Result<CreatedRecord, ClientError> {
        let symm = generate_symmetric_key(rng)?;
        let envelope = encrypt_record(&symm, plaintext, AD_MINIMAL, rng)?;
        let ptr = store.put(&envelope)?;
        let digest = compute_digest(&envelope);

        let (own_key, _) = registry.get_public_key(self.address())?;
        let wrapped_owner = wrap_key(&own_key, &symm, rng)?;

        let guardian_wrap = match guardian {
            Some(g) => {
                let guardian_public = g.public();
                Some((g, wrap_key(&guardian_public, &symm, rng)?))
            }
            None => None,
        };

        let rid = ledger.add_record(
            self.address(),
            &ptr.to_string(),
            digest,
            &wrapped_owner.to_bytes(),
        )?;

        if let Some((g, wrapped)) = guardian_wrap {
            g.store_envelope_key(ledger.address(), rid, wrapped);
        }
        self.key_cache.insert((ledger.address(), rid), symm);
        Ok(CreatedRecord { rid, ptr, digest })
    }

    /// Recovers the record key: local cache first, otherwise the owner path
    /// through the ledger.
    fn record_key(
        &mut self,
        ledger: &PatientLedger,
        rid: u64,
    ) -> Result<SymmetricKey, ClientError> {
        if let Some(k) = self.key_cache.get(&(ledger.address(), rid)) {
            return Ok(k.clone());
        }
        let wrapped_bytes = ledger.get_owner_wrapped_key(self.address(), rid)?;
        let wrapped = WrappedKey::from_bytes(&wrapped_bytes)?;
        let symm = unwrap_key(&self.encryption, &wrapped).map_err(|e| {
            ClientError::KeyUnavailable(format!("owner key unwrap failed: {}", e))
        })?;
        self.key_cache.insert((ledger.address(), rid), symm.clone());
        Ok(symm)
    }

    /// Workflow 2, patient side: wrap the record key under the grantee's
    /// *just-fetched* registry key, journal a fresh nonce, and sign the
    /// typed permission. The returned package goes to the grantee for
    /// submission.
    pub fn grant_access(
        &mut self,
        ledger: &PatientLedger,
        registry: &KeyRegistry,
        rid: u64,
        grantee: Address,
        expiration: u64,
        rng: &mut (impl CryptoRngCore + RngCore),
    ) -> Result<GrantPackage, ClientError> {
        let symm = self.record_key(ledger, rid)?;
        // TOCTOU contract: fetch immediately before wrapping.
        let (grantee_key, _) = registry.get_public_key(grantee)?;
        let wrapped = wrap_key(&grantee_key, &symm, rng)?;
        let nonce = self.next_nonce(rng)?;

        let message = PermissionMessage {
            record_id: rid,
            grantee,
            expiration,
            wrapped_key_hash: wrapped.commitment(),
            nonce,
        };
        let digest = hash_typed_permission(ledger.domain(), &message);
        let signature = sign_digest(&self.signing, &digest);

        Ok(GrantPackage {
            rid,
            grantee,
            expiration,
            wrapped_key: wrapped.to_bytes(),
            nonce,
            signature,
        })
    }

    /// Workflow 2, grantee side: submit the signed package. Ledger errors
    /// propagate verbatim.
    pub fn submit_grant(
        &self,
        ledger: &mut PatientLedger,
        package: &GrantPackage,
    ) -> Result<(), ClientError> {
        ledger.grant_permission_by_sig(
            self.address(),
            package.rid,
            package.expiration,
            &package.wrapped_key,
            package.nonce,
            &package.signature,
        )?;
        Ok(())
    }

    /// Workflow 3: fetch metadata, fetch the blob, verify the digest
    /// *before* touching any key material, unwrap, decrypt, and optionally
    /// log a read receipt.
    pub fn access_record(
        &self,
        ledger: &mut PatientLedger,
        store: &dyn BlobStore,
        rid: u64,
        log_receipt: bool,
    ) -> Result<Vec<u8>, ClientError> {
        self.access_record_traced(ledger, store, rid, log_receipt, &mut |_| {})
    }

    /// [`access_record`] with a step observer.
    pub fn access_record_traced(
        &self,
        ledger: &mut PatientLedger,
        store: &dyn BlobStore,
        rid: u64,
        log_receipt: bool,
        observe: &mut dyn FnMut(AccessStep),
    ) -> Result<Vec<u8>, ClientError> {
        let (ptr_text, expected) = ledger.get_record_metadata(self.address(), rid)?;
        observe(AccessStep::MetadataFetched);

        let ptr = StoragePointer::parse(&ptr_text)?;
        let envelope = store.get(&ptr)?;
        observe(AccessStep::BlobFetched);

        let actual = compute_digest(&envelope);
        if actual != expected {
            observe(AccessStep::DigestRejected);
            return Err(ClientError::DigestMismatch { expected, actual });
        }
        observe(AccessStep::DigestVerified);

        let wrapped_bytes = if self.address() == ledger.patient() {
            ledger.get_owner_wrapped_key(self.address(), rid)?
        } else {
            let permission = ledger.get_grantee_wrapped_key(rid, self.address())?;
            if permission.wrapped_key.is_empty() {
                return Err(ClientError::KeyUnavailable(
                    "no wrapped key stored for grantee".into(),
                ));
            }
            permission.wrapped_key
        };
        let wrapped = WrappedKey::from_bytes(&wrapped_bytes)?;
        let symm = unwrap_key(&self.encryption, &wrapped)?;
        observe(AccessStep::KeyUnwrapped);

        let plaintext = decrypt_record(&symm, &envelope)?;
        observe(AccessStep::Decrypted);

        if log_receipt {
            let details = format!(
                "accessor={} rid={} ptr={} bytes={}",
                self.address(),
                rid,
                ptr,
                plaintext.len()
            );
            ledger.log_access(self.address(), rid, sha256(details.as_bytes()))?;
        }
        Ok(plaintext)
    }

    /// Workflow 4: thin delegation to the ledger.
    pub fn revoke_access(
        &self,
        ledger: &mut PatientLedger,
        rid: u64,
        grantee: Address,
    ) -> Result<(), ClientError> {
        ledger.revoke_permission(self.address(), rid, grantee)?;
        Ok(())
    }

    /// Workflow 5: re-key and re-encrypt. Revoked parties keep only the old
    /// key, which no longer opens anything; grantees listed in
    /// `keep_grantees` get fresh packages (their current expirations carry
    /// over) that they must submit.
    pub fn rotate_record(
        &mut self,
        ledger: &mut PatientLedger,
        registry: &KeyRegistry,
        store: &dyn BlobStore,
        rid: u64,
        new_plaintext: &[u8],
        keep_grantees: &[Address],
        guardian: Option<&mut GuardianService>,
        rng: &mut (impl CryptoRngCore + RngCore),
    ) -> Result<RotationOutcome, ClientError> {
        // collect kept grantees' expirations before mutating anything
        let mut kept: Vec<(Address, u64)> = Vec::with_capacity(keep_grantees.len());
        for &grantee in keep_grantees {
            let permission = ledger.get_grantee_wrapped_key(rid, grantee)?;
            if permission.expiration == 0 {
                return Err(ClientError::KeyUnavailable(format!(
                    "grantee {} has no permission to carry over",
                    grantee
                )));
            }
            kept.push((grantee, permission.expiration));
        }

        let fresh = generate_symmetric_key(rng)?;
        let envelope = encrypt_record(&fresh, new_plaintext, AD_MINIMAL, rng)?;
        let ptr = store.put(&envelope)?;
        let digest = compute_digest(&envelope);

        let (own_key, _) = registry.get_public_key(self.address())?;
        let wrapped_owner = wrap_key(&own_key, &fresh, rng)?;

        ledger.update_record(
            self.address(),
            rid,
            &ptr.to_string(),
            digest,
            &wrapped_owner.to_bytes(),
        )?;

        if let Some(g) = guardian {
            let wrapped = wrap_key(&g.public(), &fresh, rng)?;
            g.store_envelope_key(ledger.address(), rid, wrapped);
        }

        // old key becomes obsolete; cache the replacement
        self.key_cache.insert((ledger.address(), rid), fresh);

        let mut packages = Vec::with_capacity(kept.len());
        for (grantee, expiration) in kept {
            packages.push(self.grant_access(ledger, registry, rid, grantee, expiration, rng)?);
        }
        Ok(RotationOutcome {
            ptr,
            digest,
            packages,
        })
    }
}

impl std::fmt::Debug for Actor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Actor")
            .field("role", &self.role)
            .field("address", &self.address())
            .field("cached_keys", &self.key_cache.len())
            .field("journaled_nonces", &self.nonce_journal.len())
            .finish()
    }
}

/// The emergency workflow: the guardian re-wraps the record key for both
/// physicians, both co-sign the typed request, physician 1 submits it, both
/// read the record, and the grant is confirmed with the hash of a free-text
/// justification. Only the 32-byte hash reaches the ledger.
#[allow(clippy::too_many_arguments)]
pub fn emergency_access(
    physician1: &Actor,
    physician2: &Actor,
    guardian: &GuardianService,
    ledger: &mut PatientLedger,
    registry: &KeyRegistry,
    store: &dyn BlobStore,
    rid: u64,
    justification_code: u8,
    justification_text: &str,
    max_skew_seconds: u64,
    rng: &mut (impl CryptoRngCore + RngCore),
) -> Result<EmergencyOutcome, ClientError> {
    let wrapped1 = guardian.rewrap_for(physician1.address(), ledger.address(), rid, registry, rng)?;
    let wrapped2 = guardian.rewrap_for(physician2.address(), ledger.address(), rid, registry, rng)?;

    let request_time = ledger.now();
    let request = EmergencyRequestMessage {
        record_id: rid,
        justification_code,
        request_time,
        max_skew_seconds,
    };
    let request_hash = hash_typed_emergency(ledger.domain(), &request);
    let signature1 = sign_digest(physician1.signing_keypair(), &request_hash);
    let signature2 = sign_digest(physician2.signing_keypair(), &request_hash);

    let grant_id = ledger.emergency_grant_access(
        physician1.address(),
        rid,
        physician2.address(),
        justification_code,
        request_time,
        max_skew_seconds,
        &wrapped1.to_bytes(),
        &wrapped2.to_bytes(),
        &signature1,
        &signature2,
    )?;

    let plaintext1 = physician1.access_record(ledger, store, rid, true)?;
    let plaintext2 = physician2.access_record(ledger, store, rid, true)?;

    ledger.confirm_emergency_access(
        physician1.address(),
        grant_id,
        keccak256(justification_text.as_bytes()),
    )?;

    Ok(EmergencyOutcome {
        grant_id,
        plaintext1,
        plaintext2,
    })
}

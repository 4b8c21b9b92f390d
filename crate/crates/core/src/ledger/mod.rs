//! Deterministic in-process simulation of the per-patient authorization
//! contract.
//!
//! One [`PatientLedger`] is one deployed contract instance: its own record
//! table, permission mapping, nonce set, emergency roster, event log, and
//! gas meter. Time comes from a shared [`SimClock`] standing in for
//! `block.timestamp`. All mutating calls are serialized by the owner
//! (`&mut self`); view calls take `&self`.
//!
//! Error display strings match the contract's require messages exactly —
//! they are part of the interface contract and assert targets.

mod clock;
mod events;
mod gas;

pub use clock::SimClock;
pub use events::{
    permission_key, AuditAccess, AuditEmergencyGrant, AuditPermission, AuditRecord, AuditState,
    EventFilter, EventKind, EventPayload, LedgerEvent,
};
pub use gas::{op, GasError, GasMeter, GasModel, GasProfile};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    hash_typed_emergency, hash_typed_permission, keccak256, recover_signer, ContentDigest,
    EmergencyRequestMessage, PermissionMessage, Signature, TypedDataDomain,
};
use crate::hexfmt;
use crate::types::{Address, Nonce256};

/// Grant lifetime for emergency access: 2 hours.
pub const EMERGENCY_GRANT_SECONDS: u64 = 7_200;
/// Window after grant expiry in which a confirmation is still accepted: 24 hours.
pub const CONFIRMATION_WINDOW_SECONDS: u64 = 86_400;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("Only patient")]
    OnlyPatient,
    #[error("Invalid record ID")]
    InvalidRecordId,
    #[error("Nonce already used")]
    NonceAlreadyUsed,
    #[error("Invalid signature")]
    InvalidSignature,
    #[error("Expiration must be future")]
    ExpirationMustBeFuture,
    #[error("No permission to revoke")]
    NoPermissionToRevoke,
    #[error("Not authorized")]
    NotAuthorized,
    #[error("Not emergency physician")]
    NotEmergencyPhysician,
    #[error("Different physicians required")]
    DifferentPhysiciansRequired,
    #[error("Request time outside tolerance")]
    RequestTimeOutsideTolerance,
    #[error("Invalid signatures")]
    InvalidSignatures,
    #[error("Not authorized physician")]
    NotAuthorizedPhysician,
    #[error("Already confirmed")]
    AlreadyConfirmed,
    #[error("Confirmation window expired")]
    ConfirmationWindowExpired,
}

/// On-ledger record entry.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub storage_pointer: String,
    pub content_digest: ContentDigest,
    #[serde(with = "hexfmt::vec")]
    pub wrapped_key_owner: Vec<u8>,
    pub created_at: u64,
    pub updated_at: u64,
}

/// Per-(record, grantee) grant. `expiration == 0` is the mapping default
/// and means "never granted".
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Permission {
    pub expiration: u64,
    pub revoked: bool,
    #[serde(with = "hexfmt::vec")]
    pub wrapped_key: Vec<u8>,
}

/// Two-physician emergency grant, stored under its deterministic id.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct EmergencyGrant {
    pub record_id: u64,
    pub physician1: Address,
    pub physician2: Address,
    pub expiration: u64,
    pub confirmed: bool,
}

/// One simulated patient contract.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PatientLedger {
    patient: Address,
    address: Address,
    domain: TypedDataDomain,
    profile: GasProfile,
    gas_model: GasModel,
    record_counter: u64,
    records: BTreeMap<u64, RecordMetadata>,
    permissions: BTreeMap<u64, BTreeMap<Address, Permission>>,
    /// Hex-encoded `keccak256(patient || nonce)` values already consumed.
    used_nonces: BTreeSet<String>,
    emergency_physicians: BTreeSet<Address>,
    emergency_grants: BTreeMap<String, EmergencyGrant>,
    events: Vec<LedgerEvent>,
    receipts: Vec<AuditAccess>,
    meter: GasMeter,
    #[serde(skip)]
    clock: SimClock,
}

impl PatientLedger {
    /// Deploys a ledger for `patient`. Charges deployment gas under the
    /// selected profile.
    pub fn new(
        patient: Address,
        contract_address: Address,
        chain_id: u64,
        clock: SimClock,
        gas_model: GasModel,
        profile: GasProfile,
    ) -> Self {
        let mut ledger = PatientLedger {
            patient,
            address: contract_address,
            domain: TypedDataDomain {
                name: "PatientHealthRecords".into(),
                version: "1".into(),
                chain_id,
                verifying_contract: contract_address,
            },
            profile,
            record_counter: 0,
            records: BTreeMap::new(),
            permissions: BTreeMap::new(),
            used_nonces: BTreeSet::new(),
            emergency_physicians: BTreeSet::new(),
            emergency_grants: BTreeMap::new(),
            events: Vec::new(),
            receipts: Vec::new(),
            meter: GasMeter::default(),
            gas_model,
            clock,
        };
        let cost = ledger.gas_model.cost(op::DEPLOYMENT, profile);
        ledger.meter.charge(op::DEPLOYMENT, cost);
        ledger
    }

    pub fn patient(&self) -> Address {
        self.patient
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn domain(&self) -> &TypedDataDomain {
        &self.domain
    }

    pub fn record_count(&self) -> u64 {
        self.record_counter
    }

    pub fn gas_meter(&self) -> &GasMeter {
        &self.meter
    }

    pub fn gas_profile(&self) -> GasProfile {
        self.profile
    }

    pub fn now(&self) -> u64 {
        self.clock.now()
    }

    /// Re-binds the shared clock after deserialization.
    pub fn attach_clock(&mut self, clock: SimClock) {
        self.clock = clock;
    }

    pub fn is_emergency_physician(&self, addr: Address) -> bool {
        self.emergency_physicians.contains(&addr)
    }

    fn require_patient(&self, caller: Address) -> Result<(), LedgerError> {
        if caller != self.patient {
            return Err(LedgerError::OnlyPatient);
        }
        Ok(())
    }

    fn require_valid_rid(&self, rid: u64) -> Result<(), LedgerError> {
        if rid == 0 || rid > self.record_counter {
            return Err(LedgerError::InvalidRecordId);
        }
        Ok(())
    }

    fn emit(&mut self, payload: EventPayload) {
        self.events.push(LedgerEvent {
            seq: self.events.len() as u64 + 1,
            time: self.clock.now(),
            payload,
        });
    }

    fn charge(&mut self, operation: &str) {
        let cost = self.gas_model.cost(operation, self.profile);
        self.meter.charge(operation, cost);
    }

    /// Registers a record: pointer, content digest, and the owner's wrapped
    /// key. Returns the new record id.
    pub fn add_record(
        &mut self,
        caller: Address,
        ptr: &str,
        digest: ContentDigest,
        wrapped_key: &[u8],
    ) -> Result<u64, LedgerError> {
        self.require_patient(caller)?;
        self.record_counter += 1;
        let rid = self.record_counter;
        let now = self.clock.now();
        self.records.insert(
            rid,
            RecordMetadata {
                storage_pointer: ptr.to_string(),
                content_digest: digest,
                wrapped_key_owner: wrapped_key.to_vec(),
                created_at: now,
                updated_at: now,
            },
        );
        self.emit(EventPayload::RecordAdded {
            rid,
            digest,
            ptr: ptr.to_string(),
        });
        let cost = self.gas_model.add_record_cost(self.profile, rid == 1);
        self.meter.charge(op::ADD_RECORD, cost);
        Ok(rid)
    }

    /// Consumes a patient-signed grant submitted by the grantee. Check
    /// order follows the contract: record id, nonce, signature, expiration.
    pub fn grant_permission_by_sig(
        &mut self,
        caller: Address,
        rid: u64,
        expiration: u64,
        wrapped_key: &[u8],
        nonce: Nonce256,
        signature: &Signature,
    ) -> Result<(), LedgerError> {
        self.require_valid_rid(rid)?;

        let nonce_hash = self.nonce_hash(nonce);
        if self.used_nonces.contains(&nonce_hash) {
            return Err(LedgerError::NonceAlreadyUsed);
        }

        let message = PermissionMessage {
            record_id: rid,
            grantee: caller,
            expiration,
            wrapped_key_hash: keccak256(wrapped_key),
            nonce,
        };
        let digest = hash_typed_permission(&self.domain, &message);
        let signer =
            recover_signer(&digest, signature).map_err(|_| LedgerError::InvalidSignature)?;
        if signer != self.patient {
            return Err(LedgerError::InvalidSignature);
        }

        if expiration <= self.clock.now() {
            return Err(LedgerError::ExpirationMustBeFuture);
        }

        self.used_nonces.insert(nonce_hash);
        self.permissions.entry(rid).or_default().insert(
            caller,
            Permission {
                expiration,
                revoked: false,
                wrapped_key: wrapped_key.to_vec(),
            },
        );
        self.emit(EventPayload::PermissionGranted {
            rid,
            grantee: caller,
            expiration,
        });
        self.charge(op::GRANT_PERMISSION_BY_SIG);
        Ok(())
    }

    fn nonce_hash(&self, nonce: Nonce256) -> String {
        let mut buf = Vec::with_capacity(52);
        buf.extend_from_slice(self.patient.as_bytes());
        buf.extend_from_slice(nonce.as_bytes());
        hexfmt::encode(keccak256(&buf))
    }

    /// The patient always has access; grantees need an unrevoked, unexpired
    /// permission. Expiration uses strict inequality: at `now == expiration`
    /// access is already gone.
    pub fn has_valid_permission(&self, caller: Address, rid: u64) -> Result<bool, LedgerError> {
        self.require_valid_rid(rid)?;
        if caller == self.patient {
            return Ok(true);
        }
        let now = self.clock.now();
        Ok(self
            .permissions
            .get(&rid)
            .and_then(|m| m.get(&caller))
            .map(|p| !p.revoked && p.expiration > 0 && p.expiration > now)
            .unwrap_or(false))
    }

    /// View call: pointer and digest, gated by the permission check. The
    /// same data is public in `RecordAdded`/`RecordUpdated` events; the
    /// gate is interface consistency, not confidentiality.
    pub fn get_record_metadata(
        &self,
        caller: Address,
        rid: u64,
    ) -> Result<(String, ContentDigest), LedgerError> {
        self.require_valid_rid(rid)?;
        if !self.has_valid_permission(caller, rid)? {
            return Err(LedgerError::NotAuthorized);
        }
        let rec = self.records.get(&rid).expect("valid rid has metadata");
        Ok((rec.storage_pointer.clone(), rec.content_digest))
    }

    /// Full metadata including timestamps, patient only.
    pub fn get_record_entry(
        &self,
        caller: Address,
        rid: u64,
    ) -> Result<&RecordMetadata, LedgerError> {
        self.require_patient(caller)?;
        self.require_valid_rid(rid)?;
        Ok(self.records.get(&rid).expect("valid rid has metadata"))
    }

    pub fn get_owner_wrapped_key(
        &self,
        caller: Address,
        rid: u64,
    ) -> Result<Vec<u8>, LedgerError> {
        self.require_patient(caller)?;
        self.require_valid_rid(rid)?;
        Ok(self
            .records
            .get(&rid)
            .expect("valid rid has metadata")
            .wrapped_key_owner
            .clone())
    }

    /// Public-mapping read: anyone can fetch any (record, grantee)
    /// permission. Never-granted pairs return the zero permission. Exposing
    /// wrapped-key ciphertexts does not endanger plaintext.
    pub fn get_grantee_wrapped_key(
        &self,
        rid: u64,
        grantee: Address,
    ) -> Result<Permission, LedgerError> {
        self.require_valid_rid(rid)?;
        Ok(self
            .permissions
            .get(&rid)
            .and_then(|m| m.get(&grantee))
            .cloned()
            .unwrap_or_default())
    }

    /// Replaces pointer, digest, and owner key; `created_at` is preserved.
    pub fn update_record(
        &mut self,
        caller: Address,
        rid: u64,
        new_ptr: &str,
        new_digest: ContentDigest,
        new_owner_wrapped_key: &[u8],
    ) -> Result<(), LedgerError> {
        self.require_patient(caller)?;
        self.require_valid_rid(rid)?;
        let now = self.clock.now();
        let rec = self.records.get_mut(&rid).expect("valid rid has metadata");
        rec.storage_pointer = new_ptr.to_string();
        rec.content_digest = new_digest;
        rec.wrapped_key_owner = new_owner_wrapped_key.to_vec();
        rec.updated_at = now;
        self.emit(EventPayload::RecordUpdated {
            rid,
            digest: new_digest,
            ptr: new_ptr.to_string(),
        });
        self.charge(op::UPDATE_RECORD);
        Ok(())
    }

    /// Revocation requires an existing grant (`expiration > 0` sentinel).
    pub fn revoke_permission(
        &mut self,
        caller: Address,
        rid: u64,
        grantee: Address,
    ) -> Result<(), LedgerError> {
        self.require_patient(caller)?;
        self.require_valid_rid(rid)?;
        let permission = self
            .permissions
            .get_mut(&rid)
            .and_then(|m| m.get_mut(&grantee))
            .filter(|p| p.expiration > 0)
            .ok_or(LedgerError::NoPermissionToRevoke)?;
        permission.revoked = true;
        self.emit(EventPayload::PermissionRevoked { rid, grantee });
        self.charge(op::REVOKE_PERMISSION);
        Ok(())
    }

    /// Patient-controlled emergency roster.
    pub fn set_emergency_physician(
        &mut self,
        caller: Address,
        physician: Address,
        enabled: bool,
    ) -> Result<(), LedgerError> {
        self.require_patient(caller)?;
        if enabled {
            self.emergency_physicians.insert(physician);
        } else {
            self.emergency_physicians.remove(&physician);
        }
        Ok(())
    }

    /// Two-physician emergency grant. Both signatures cover the same typed
    /// request; both physicians receive a 2-hour permission.
    #[allow(clippy::too_many_arguments)]
    pub fn emergency_grant_access(
        &mut self,
        caller: Address,
        rid: u64,
        physician2: Address,
        justification_code: u8,
        request_time: u64,
        max_skew_seconds: u64,
        wrapped_key1: &[u8],
        wrapped_key2: &[u8],
        signature1: &Signature,
        signature2: &Signature,
    ) -> Result<[u8; 32], LedgerError> {
        self.require_valid_rid(rid)?;
        if !self.emergency_physicians.contains(&caller)
            || !self.emergency_physicians.contains(&physician2)
        {
            return Err(LedgerError::NotEmergencyPhysician);
        }
        if caller == physician2 {
            return Err(LedgerError::DifferentPhysiciansRequired);
        }

        let now = self.clock.now();
        let skew = now.abs_diff(request_time);
        if skew > max_skew_seconds {
            return Err(LedgerError::RequestTimeOutsideTolerance);
        }

        let request = EmergencyRequestMessage {
            record_id: rid,
            justification_code,
            request_time,
            max_skew_seconds,
        };
        let request_hash = hash_typed_emergency(&self.domain, &request);
        let signer1 = recover_signer(&request_hash, signature1)
            .map_err(|_| LedgerError::InvalidSignatures)?;
        let signer2 = recover_signer(&request_hash, signature2)
            .map_err(|_| LedgerError::InvalidSignatures)?;
        if signer1 != caller || signer2 != physician2 {
            return Err(LedgerError::InvalidSignatures);
        }

        let expiration = now + EMERGENCY_GRANT_SECONDS;
        let perms = self.permissions.entry(rid).or_default();
        perms.insert(
            caller,
            Permission {
                expiration,
                revoked: false,
                wrapped_key: wrapped_key1.to_vec(),
            },
        );
        perms.insert(
            physician2,
            Permission {
                expiration,
                revoked: false,
                wrapped_key: wrapped_key2.to_vec(),
            },
        );

        let grant_id = emergency_grant_id(rid, request_time, caller, physician2);
        self.emergency_grants.insert(
            hexfmt::encode(grant_id),
            EmergencyGrant {
                record_id: rid,
                physician1: caller,
                physician2,
                expiration,
                confirmed: false,
            },
        );
        self.emit(EventPayload::EmergencyAccessGranted {
            grant_id,
            rid,
            physician1: caller,
            physician2,
            justification_code,
            expiration,
            request_time,
        });
        self.charge(op::EMERGENCY_GRANT_ACCESS);
        Ok(grant_id)
    }

    /// Post-hoc justification. Either physician may confirm, once, within
    /// 24 hours of the grant's expiry.
    pub fn confirm_emergency_access(
        &mut self,
        caller: Address,
        grant_id: [u8; 32],
        justification_hash: [u8; 32],
    ) -> Result<(), LedgerError> {
        let key = hexfmt::encode(grant_id);
        let now = self.clock.now();
        let grant = self
            .emergency_grants
            .get_mut(&key)
            .filter(|g| g.physician1 == caller || g.physician2 == caller)
            .ok_or(LedgerError::NotAuthorizedPhysician)?;
        if grant.confirmed {
            return Err(LedgerError::AlreadyConfirmed);
        }
        if now > grant.expiration + CONFIRMATION_WINDOW_SECONDS {
            return Err(LedgerError::ConfirmationWindowExpired);
        }
        grant.confirmed = true;
        let rid = grant.record_id;
        self.emit(EventPayload::EmergencyAccessConfirmed {
            grant_id,
            rid,
            physician: caller,
            justification_hash,
        });
        self.charge(op::CONFIRM_EMERGENCY_ACCESS);
        Ok(())
    }

    pub fn get_emergency_grant(&self, grant_id: [u8; 32]) -> Option<&EmergencyGrant> {
        self.emergency_grants.get(&hexfmt::encode(grant_id))
    }

    /// Optional read receipt; the only source of access (not authorization)
    /// history.
    pub fn log_access(
        &mut self,
        caller: Address,
        rid: u64,
        details_hash: [u8; 32],
    ) -> Result<(), LedgerError> {
        if !self.has_valid_permission(caller, rid)? {
            return Err(LedgerError::NotAuthorized);
        }
        self.receipts.push(AuditAccess {
            rid,
            accessor: caller,
            details_hash,
        });
        self.emit(EventPayload::AccessLogged {
            rid,
            accessor: caller,
            details_hash,
        });
        Ok(())
    }

    /// Pure read over the event log, in sequence order.
    pub fn query_events(&self, filter: &EventFilter) -> Vec<LedgerEvent> {
        self.events
            .iter()
            .filter(|e| filter.matches(e))
            .cloned()
            .collect()
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    /// Projects current state onto the event-visible audit view. Folding
    /// the event log must reproduce exactly this.
    pub fn audit_projection(&self) -> AuditState {
        let mut state = AuditState {
            record_count: self.record_counter,
            ..Default::default()
        };
        for (rid, rec) in &self.records {
            state.records.insert(
                rid.to_string(),
                AuditRecord {
                    ptr: rec.storage_pointer.clone(),
                    digest: rec.content_digest,
                    created_at: rec.created_at,
                    updated_at: rec.updated_at,
                },
            );
        }
        for (rid, grants) in &self.permissions {
            for (grantee, p) in grants {
                state.permissions.insert(
                    permission_key(*rid, *grantee),
                    AuditPermission {
                        expiration: p.expiration,
                        revoked: p.revoked,
                    },
                );
            }
        }
        for (id_hex, g) in &self.emergency_grants {
            state.emergency_grants.insert(
                id_hex.clone(),
                AuditEmergencyGrant {
                    rid: g.record_id,
                    physician1: g.physician1,
                    physician2: g.physician2,
                    expiration: g.expiration,
                    confirmed: g.confirmed,
                },
            );
        }
        state.access_log = self.receipts.clone();
        state
    }

    /// Raw gas lookup for the active model.
    pub fn gas_of(&self, operation: &str, profile: GasProfile) -> Result<u64, GasError> {
        self.gas_model.gas_of(operation, profile)
    }
}

/// `keccak256(abi.encode(rid, requestTime, physician1, physician2))`.
pub fn emergency_grant_id(
    rid: u64,
    request_time: u64,
    physician1: Address,
    physician2: Address,
) -> [u8; 32] {
    let mut buf = Vec::with_capacity(128);
    buf.extend_from_slice(&abi_word_u64(rid));
    buf.extend_from_slice(&abi_word_u64(request_time));
    buf.extend_from_slice(&abi_word_address(physician1));
    buf.extend_from_slice(&abi_word_address(physician2));
    keccak256(&buf)
}

fn abi_word_u64(v: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    out[24..].copy_from_slice(&v.to_be_bytes());
    out
}

fn abi_word_address(addr: Address) -> [u8; 32] {
    let mut out = [0u8; 32];
    out[12..].copy_from_slice(addr.as_bytes());
    out
}

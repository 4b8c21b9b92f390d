//! Append-only ledger events and the audit projection folded from them.
//!
//! Events mirror the contract's event parameters. Folding them rebuilds the
//! complete authorization history: which records exist, who was granted
//! what and until when, emergency grants and their confirmations, and any
//! explicitly logged access receipts. Storage payloads that never appear in
//! events (wrapped key bytes, consumed nonces) are by construction not part
//! of this projection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::ContentDigest;
use crate::hexfmt;
use crate::types::Address;

/// Event payloads, tagged by kind.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventPayload {
    RecordAdded {
        rid: u64,
        digest: ContentDigest,
        ptr: String,
    },
    RecordUpdated {
        rid: u64,
        digest: ContentDigest,
        ptr: String,
    },
    PermissionGranted {
        rid: u64,
        grantee: Address,
        expiration: u64,
    },
    PermissionRevoked {
        rid: u64,
        grantee: Address,
    },
    EmergencyAccessGranted {
        #[serde(with = "hexfmt::array")]
        grant_id: [u8; 32],
        rid: u64,
        physician1: Address,
        physician2: Address,
        justification_code: u8,
        expiration: u64,
        request_time: u64,
    },
    EmergencyAccessConfirmed {
        #[serde(with = "hexfmt::array")]
        grant_id: [u8; 32],
        rid: u64,
        physician: Address,
        #[serde(with = "hexfmt::array")]
        justification_hash: [u8; 32],
    },
    AccessLogged {
        rid: u64,
        accessor: Address,
        #[serde(with = "hexfmt::array")]
        details_hash: [u8; 32],
    },
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::RecordAdded { .. } => EventKind::RecordAdded,
            EventPayload::RecordUpdated { .. } => EventKind::RecordUpdated,
            EventPayload::PermissionGranted { .. } => EventKind::PermissionGranted,
            EventPayload::PermissionRevoked { .. } => EventKind::PermissionRevoked,
            EventPayload::EmergencyAccessGranted { .. } => EventKind::EmergencyAccessGranted,
            EventPayload::EmergencyAccessConfirmed { .. } => EventKind::EmergencyAccessConfirmed,
            EventPayload::AccessLogged { .. } => EventKind::AccessLogged,
        }
    }

    fn record_id(&self) -> u64 {
        match self {
            EventPayload::RecordAdded { rid, .. }
            | EventPayload::RecordUpdated { rid, .. }
            | EventPayload::PermissionGranted { rid, .. }
            | EventPayload::PermissionRevoked { rid, .. }
            | EventPayload::EmergencyAccessGranted { rid, .. }
            | EventPayload::EmergencyAccessConfirmed { rid, .. }
            | EventPayload::AccessLogged { rid, .. } => *rid,
        }
    }

    fn mentions(&self, address: Address) -> bool {
        match self {
            EventPayload::RecordAdded { .. } | EventPayload::RecordUpdated { .. } => false,
            EventPayload::PermissionGranted { grantee, .. }
            | EventPayload::PermissionRevoked { grantee, .. } => *grantee == address,
            EventPayload::EmergencyAccessGranted {
                physician1,
                physician2,
                ..
            } => *physician1 == address || *physician2 == address,
            EventPayload::EmergencyAccessConfirmed { physician, .. } => *physician == address,
            EventPayload::AccessLogged { accessor, .. } => *accessor == address,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum EventKind {
    RecordAdded,
    RecordUpdated,
    PermissionGranted,
    PermissionRevoked,
    EmergencyAccessGranted,
    EmergencyAccessConfirmed,
    AccessLogged,
}

/// One audit entry: strictly increasing sequence number, the block time at
/// emission, and the payload.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub seq: u64,
    pub time: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl LedgerEvent {
    /// One JSON object per line for the export format.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

/// Query filter; all fields are conjunctive when present.
#[derive(Clone, Debug, Default)]
pub struct EventFilter {
    pub kind: Option<EventKind>,
    pub record_id: Option<u64>,
    pub address: Option<Address>,
    pub seq_range: Option<(u64, u64)>,
}

impl EventFilter {
    pub fn matches(&self, event: &LedgerEvent) -> bool {
        if let Some(kind) = self.kind {
            if event.payload.kind() != kind {
                return false;
            }
        }
        if let Some(rid) = self.record_id {
            if event.payload.record_id() != rid {
                return false;
            }
        }
        if let Some(addr) = self.address {
            if !event.payload.mentions(addr) {
                return false;
            }
        }
        if let Some((lo, hi)) = self.seq_range {
            if event.seq < lo || event.seq > hi {
                return false;
            }
        }
        true
    }
}

/// The authorization state visible to any event-log observer.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct AuditState {
    pub record_count: u64,
    /// Keyed by decimal record id.
    pub records: BTreeMap<String, AuditRecord>,
    /// Keyed by `"<rid>:<grantee hex>"`.
    pub permissions: BTreeMap<String, AuditPermission>,
    /// Keyed by grant id hex.
    pub emergency_grants: BTreeMap<String, AuditEmergencyGrant>,
    pub access_log: Vec<AuditAccess>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AuditRecord {
    pub ptr: String,
    pub digest: ContentDigest,
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AuditPermission {
    pub expiration: u64,
    pub revoked: bool,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AuditEmergencyGrant {
    pub rid: u64,
    pub physician1: Address,
    pub physician2: Address,
    pub expiration: u64,
    pub confirmed: bool,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AuditAccess {
    pub rid: u64,
    pub accessor: Address,
    #[serde(with = "hexfmt::array")]
    pub details_hash: [u8; 32],
}

pub fn permission_key(rid: u64, grantee: Address) -> String {
    format!("{}:{}", rid, grantee.to_hex())
}

impl AuditState {
    /// Folds an ordered event stream into the projection.
    pub fn fold(events: &[LedgerEvent]) -> Self {
        let mut state = AuditState::default();
        for event in events {
            state.apply(event);
        }
        state
    }

    fn apply(&mut self, event: &LedgerEvent) {
        match &event.payload {
            EventPayload::RecordAdded { rid, digest, ptr } => {
                self.record_count += 1;
                self.records.insert(
                    rid.to_string(),
                    AuditRecord {
                        ptr: ptr.clone(),
                        digest: *digest,
                        created_at: event.time,
                        updated_at: event.time,
                    },
                );
            }
            EventPayload::RecordUpdated { rid, digest, ptr } => {
                if let Some(rec) = self.records.get_mut(&rid.to_string()) {
                    rec.ptr = ptr.clone();
                    rec.digest = *digest;
                    rec.updated_at = event.time;
                }
            }
            EventPayload::PermissionGranted {
                rid,
                grantee,
                expiration,
            } => {
                self.permissions.insert(
                    permission_key(*rid, *grantee),
                    AuditPermission {
                        expiration: *expiration,
                        revoked: false,
                    },
                );
            }
            EventPayload::PermissionRevoked { rid, grantee } => {
                if let Some(p) = self.permissions.get_mut(&permission_key(*rid, *grantee)) {
                    p.revoked = true;
                }
            }
            EventPayload::EmergencyAccessGranted {
                grant_id,
                rid,
                physician1,
                physician2,
                expiration,
                ..
            } => {
                for phys in [physician1, physician2] {
                    self.permissions.insert(
                        permission_key(*rid, *phys),
                        AuditPermission {
                            expiration: *expiration,
                            revoked: false,
                        },
                    );
                }
                self.emergency_grants.insert(
                    hexfmt::encode(grant_id),
                    AuditEmergencyGrant {
                        rid: *rid,
                        physician1: *physician1,
                        physician2: *physician2,
                        expiration: *expiration,
                        confirmed: false,
                    },
                );
            }
            EventPayload::EmergencyAccessConfirmed { grant_id, .. } => {
                if let Some(g) = self.emergency_grants.get_mut(&hexfmt::encode(grant_id)) {
                    g.confirmed = true;
                }
            }
            EventPayload::AccessLogged {
                rid,
                accessor,
                details_hash,
            } => {
                self.access_log.push(AuditAccess {
                    rid: *rid,
                    accessor: *accessor,
                    details_hash: *details_hash,
                });
            }
        }
    }

    /// Canonical serialized form, used for byte-for-byte comparisons.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("audit state serializes")
    }
}

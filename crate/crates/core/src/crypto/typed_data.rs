//! Typed structured-data hashing (EIP-712 layout).
//!
//! The digest a patient signs commits to the record, grantee, expiration,
//! the wrapped key bytes (through their keccak hash), and the grant nonce,
//! all bound to one ledger instance and chain through the domain separator.

use serde::{Deserialize, Serialize};

use super::keys::keccak256;
use crate::types::{Address, Nonce256};

/// Type string for permission grants. Field order matches the signed
/// message layout.
pub const PERMISSION_TYPE: &str =
    "Permission(uint256 recordId,address grantee,uint64 expiration,bytes32 wrappedKeyHash,uint256 nonce)";

/// Type string for two-physician emergency requests.
pub const EMERGENCY_REQUEST_TYPE: &str =
    "EmergencyRequest(uint256 recordId,uint8 justificationCode,uint64 requestTime,uint64 maxSkewSeconds)";

const DOMAIN_TYPE: &str =
    "EIP712Domain(string name,string version,uint256 chainId,address verifyingContract)";

/// The domain separator inputs. All four fields participate in the hash, so
/// a signature never verifies under a different contract or chain.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TypedDataDomain {
    pub name: String,
    pub version: String,
    pub chain_id: u64,
    pub verifying_contract: Address,
}

impl TypedDataDomain {
    pub fn separator(&self) -> [u8; 32] {
        let mut buf = Vec::with_capacity(160);
        buf.extend_from_slice(&keccak256(DOMAIN_TYPE.as_bytes()));
        buf.extend_from_slice(&keccak256(self.name.as_bytes()));
        buf.extend_from_slice(&keccak256(self.version.as_bytes()));
        buf.extend_from_slice(&pad_u64(self.chain_id));
        buf.extend_from_slice(&pad_address(&self.verifying_contract));
        keccak256(&buf)
    }
}

/// The struct a patient signs to authorize one grant.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct PermissionMessage {
    pub record_id: u64,
    pub grantee: Address,
    pub expiration: u64,
    /// keccak256 over the full serialized wrapped key.
    pub wrapped_key_hash: [u8; 32],
    pub nonce: Nonce256,
}

impl PermissionMessage {
    pub fn struct_hash(&self) -> [u8; 32] {
        let mut buf = Vec::with_capacity(192);
        buf.extend_from_slice(&keccak256(PERMISSION_TYPE.as_bytes()));
        buf.extend_from_slice(&pad_u64(self.record_id));
        buf.extend_from_slice(&pad_address(&self.grantee));
        buf.extend_from_slice(&pad_u64(self.expiration));
        buf.extend_from_slice(&self.wrapped_key_hash);
        buf.extend_from_slice(self.nonce.as_bytes());
        keccak256(&buf)
    }
}

/// The struct each physician signs for an emergency grant.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct EmergencyRequestMessage {
    pub record_id: u64,
    pub justification_code: u8,
    pub request_time: u64,
    pub max_skew_seconds: u64,
}

impl EmergencyRequestMessage {
    pub fn struct_hash(&self) -> [u8; 32] {
        let mut buf = Vec::with_capacity(160);
        buf.extend_from_slice(&keccak256(EMERGENCY_REQUEST_TYPE.as_bytes()));
        buf.extend_from_slice(&pad_u64(self.record_id));
        buf.extend_from_slice(&pad_u8(self.justification_code));
        buf.extend_from_slice(&pad_u64(self.request_time));
        buf.extend_from_slice(&pad_u64(self.max_skew_seconds));
        keccak256(&buf)
    }
}

/// Final digest: `keccak256(0x19 0x01 || domainSeparator || structHash)`.
pub fn hash_typed_permission(domain: &TypedDataDomain, msg: &PermissionMessage) -> [u8; 32] {
    hash_typed(domain, msg.struct_hash())
}

/// Same layout for emergency requests.
pub fn hash_typed_emergency(domain: &TypedDataDomain, msg: &EmergencyRequestMessage) -> [u8; 32] {
    hash_typed(domain, msg.struct_hash())
}

fn hash_typed(domain: &TypedDataDomain, struct_hash: [u8; 32]) -> [u8; 32] {
    let mut buf = Vec::with_capacity(66);
    buf.extend_from_slice(&[0x19, 0x01]);
    buf.extend_from_slice(&domain.separator());
    buf.extend_from_slice(&struct_hash);
    keccak256(&buf)
}

/// 32-byte big-endian word holding a u64.
fn pad_u64(v: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    out[24..].copy_from_slice(&v.to_be_bytes());
    out
}

fn pad_u8(v: u8) -> [u8; 32] {
    let mut out = [0u8; 32];
    out[31] = v;
    out
}

/// Addresses left-pad to a 32-byte word.
fn pad_address(addr: &Address) -> [u8; 32] {
    let mut out = [0u8; 32];
    out[12..].copy_from_slice(addr.as_bytes());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain() -> TypedDataDomain {
        TypedDataDomain {
            name: "PatientHealthRecords".into(),
            version: "1".into(),
            chain_id: 1,
            verifying_contract: Address([0x11; 20]),
        }
    }

    fn message() -> PermissionMessage {
        PermissionMessage {
            record_id: 1,
            grantee: Address([0x22; 20]),
            expiration: 1_700_000_000,
            wrapped_key_hash: [0x33; 32],
            nonce: Nonce256::from_u64(7),
        }
    }

    #[test]
    fn identical_inputs_hash_identically() {
        assert_eq!(
            hash_typed_permission(&domain(), &message()),
            hash_typed_permission(&domain(), &message())
        );
    }

    #[test]
    fn every_domain_field_separates() {
        let base = hash_typed_permission(&domain(), &message());
        let variants = [
            TypedDataDomain { chain_id: 2, ..domain() },
            TypedDataDomain { name: "Other".into(), ..domain() },
            TypedDataDomain { version: "2".into(), ..domain() },
            TypedDataDomain { verifying_contract: Address([0x12; 20]), ..domain() },
        ];
        for v in variants {
            assert_ne!(hash_typed_permission(&v, &message()), base);
        }
    }

    #[test]
    fn every_message_field_separates() {
        let base = hash_typed_permission(&domain(), &message());
        let variants = [
            PermissionMessage { record_id: 2, ..message() },
            PermissionMessage { grantee: Address([0x23; 20]), ..message() },
            PermissionMessage { expiration: 1_700_000_001, ..message() },
            PermissionMessage { wrapped_key_hash: [0x34; 32], ..message() },
            PermissionMessage { nonce: Nonce256::from_u64(8), ..message() },
        ];
        for v in variants {
            assert_ne!(hash_typed_permission(&domain(), &v), base);
        }
    }

    #[test]
    fn emergency_fields_separate() {
        let msg = EmergencyRequestMessage {
            record_id: 1,
            justification_code: 3,
            request_time: 1000,
            max_skew_seconds: 300,
        };
        let base = hash_typed_emergency(&domain(), &msg);
        let other = EmergencyRequestMessage {
            justification_code: 4,
            ..msg
        };
        assert_ne!(hash_typed_emergency(&domain(), &other), base);
    }
}

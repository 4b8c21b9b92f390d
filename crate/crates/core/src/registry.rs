//! Versioned encryption-key registry.
//!
//! One registry is shared by every participant in a simulation world. It
//! maps addresses to their current encryption public key and version;
//! lookups never return revoked entries. Clients are expected to fetch the
//! key immediately before wrapping — the registry cannot protect a caller
//! who wraps against a stale copy.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::PublicKey;
use crate::hexfmt;
use crate::types::Address;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("key already registered")]
    AlreadyRegistered,
    #[error("invalid public key encoding")]
    InvalidKey,
    #[error("no active key")]
    NoActiveKey,
    #[error("no key registered for user")]
    NotFound,
}

/// One registered key with its rotation version.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct KeyEntry {
    #[serde(with = "hexfmt::vec")]
    pub public_key: Vec<u8>,
    pub version: u64,
    pub revoked: bool,
}

/// Registry events mirror the contract interface one-to-one.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RegistryEvent {
    KeyRegistered {
        user: Address,
        #[serde(with = "hexfmt::vec")]
        public_key: Vec<u8>,
    },
    KeyRotated {
        user: Address,
        #[serde(with = "hexfmt::vec")]
        new_key: Vec<u8>,
        version: u64,
    },
    KeyRevoked {
        user: Address,
    },
}

/// The registry state machine. Mutations are serialized by the caller (the
/// simulation world's transaction queue); reads are plain borrows.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct KeyRegistry {
    entries: HashMap<Address, KeyEntry>,
    events: Vec<RegistryEvent>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a first key (version 1) or, after a revocation, continues
    /// the version counter — a revoked slot behaves like a rotation target.
    pub fn register_key(
        &mut self,
        caller: Address,
        public_key: &[u8],
    ) -> Result<u64, RegistryError> {
        PublicKey::from_uncompressed(public_key).map_err(|_| RegistryError::InvalidKey)?;
        let version = match self.entries.get(&caller) {
            Some(entry) if !entry.revoked => return Err(RegistryError::AlreadyRegistered),
            Some(entry) => entry.version + 1,
            None => 1,
        };
        self.entries.insert(
            caller,
            KeyEntry {
                public_key: public_key.to_vec(),
                version,
                revoked: false,
            },
        );
        self.events.push(RegistryEvent::KeyRegistered {
            user: caller,
            public_key: public_key.to_vec(),
        });
        Ok(version)
    }

    pub fn rotate_key(
        &mut self,
        caller: Address,
        new_public_key: &[u8],
    ) -> Result<u64, RegistryError> {
        PublicKey::from_uncompressed(new_public_key).map_err(|_| RegistryError::InvalidKey)?;
        let entry = self
            .entries
            .get_mut(&caller)
            .filter(|e| !e.revoked)
            .ok_or(RegistryError::NoActiveKey)?;
        entry.version += 1;
        entry.public_key = new_public_key.to_vec();
        let version = entry.version;
        self.events.push(RegistryEvent::KeyRotated {
            user: caller,
            new_key: new_public_key.to_vec(),
            version,
        });
        Ok(version)
    }

    /// Latest non-revoked key and its version.
    pub fn get_key(&self, user: Address) -> Result<(Vec<u8>, u64), RegistryError> {
        self.entries
            .get(&user)
            .filter(|e| !e.revoked)
            .map(|e| (e.public_key.clone(), e.version))
            .ok_or(RegistryError::NotFound)
    }

    /// Typed convenience over [`get_key`].
    pub fn get_public_key(&self, user: Address) -> Result<(PublicKey, u64), RegistryError> {
        let (bytes, version) = self.get_key(user)?;
        let key =
            PublicKey::from_uncompressed(&bytes).map_err(|_| RegistryError::InvalidKey)?;
        Ok((key, version))
    }

    pub fn revoke_key(&mut self, caller: Address) -> Result<(), RegistryError> {
        let entry = self
            .entries
            .get_mut(&caller)
            .filter(|e| !e.revoked)
            .ok_or(RegistryError::NoActiveKey)?;
        entry.revoked = true;
        self.events.push(RegistryEvent::KeyRevoked { user: caller });
        Ok(())
    }

    pub fn events(&self) -> &[RegistryEvent] {
        &self.events
    }

    /// Rebuilds registry state from its event log alone.
    pub fn replay(events: &[RegistryEvent]) -> Self {
        let mut entries: HashMap<Address, KeyEntry> = HashMap::new();
        for event in events {
            match event {
                RegistryEvent::KeyRegistered { user, public_key } => {
                    let version = entries.get(user).map(|e| e.version + 1).unwrap_or(1);
                    entries.insert(
                        *user,
                        KeyEntry {
                            public_key: public_key.clone(),
                            version,
                            revoked: false,
                        },
                    );
                }
                RegistryEvent::KeyRotated { user, new_key, version } => {
                    entries.insert(
                        *user,
                        KeyEntry {
                            public_key: new_key.clone(),
                            version: *version,
                            revoked: false,
                        },
                    );
                }
                RegistryEvent::KeyRevoked { user } => {
                    if let Some(e) = entries.get_mut(user) {
                        e.revoked = true;
                    }
                }
            }
        }
        KeyRegistry {
            entries,
            events: events.to_vec(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("registry serializes")
    }
}

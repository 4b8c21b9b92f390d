//! In-memory content-addressed store.

use std::collections::HashMap;
use std::sync::RwLock;

use super::{
    deserialize_envelope, locator_for, serialize_envelope, BlobStore, Scheme, StoragePointer,
    StoreError,
};
use crate::crypto::EncryptedEnvelope;

#[derive(Debug, Default)]
pub struct MemoryStore {
    blobs: RwLock<HashMap<String, Vec<u8>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blobs.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Snapshot of all stored bytes, for persistence and sentinel scans.
    pub fn export(&self) -> Vec<(String, Vec<u8>)> {
        let mut entries: Vec<_> = self
            .blobs
            .read()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        entries.sort();
        entries
    }

    /// Restores blobs exported by [`export`]. Locators are recomputed, not
    /// trusted.
    pub fn import(entries: Vec<(String, Vec<u8>)>) -> Self {
        let store = MemoryStore::new();
        {
            let mut blobs = store.blobs.write().unwrap();
            for (_, bytes) in entries {
                blobs.insert(locator_for(&bytes), bytes);
            }
        }
        store
    }
}

impl BlobStore for MemoryStore {
    fn put(&self, envelope: &EncryptedEnvelope) -> Result<StoragePointer, StoreError> {
        let bytes = serialize_envelope(envelope);
        let locator = locator_for(&bytes);
        self.blobs.write().unwrap().insert(locator.clone(), bytes);
        Ok(StoragePointer {
            scheme: Scheme::Mem,
            locator,
        })
    }

    fn get(&self, ptr: &StoragePointer) -> Result<EncryptedEnvelope, StoreError> {
        let blobs = self.blobs.read().unwrap();
        let bytes = blobs
            .get(&ptr.locator)
            .ok_or_else(|| StoreError::NotFound(ptr.to_string()))?;
        deserialize_envelope(bytes)
    }

    fn delete(&self, ptr: &StoragePointer) -> Result<bool, StoreError> {
        Ok(self.blobs.write().unwrap().remove(&ptr.locator).is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{AD_MINIMAL, GCM_NONCE_LEN, GCM_TAG_LEN};

    fn envelope(fill: u8) -> EncryptedEnvelope {
        EncryptedEnvelope {
            ciphertext: vec![fill; 24],
            tag: [fill; GCM_TAG_LEN],
            nonce: [fill; GCM_NONCE_LEN],
            associated_data: AD_MINIMAL.to_vec(),
        }
    }

    #[test]
    fn put_get_round_trip() {
        let store = MemoryStore::new();
        let env = envelope(1);
        let ptr = store.put(&env).unwrap();
        assert_eq!(store.get(&ptr).unwrap(), env);
    }

    #[test]
    fn identical_envelopes_share_a_pointer() {
        let store = MemoryStore::new();
        let p1 = store.put(&envelope(1)).unwrap();
        let p2 = store.put(&envelope(1)).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(store.len(), 1);
        let p3 = store.put(&envelope(2)).unwrap();
        assert_ne!(p1, p3);
    }

    #[test]
    fn locator_is_sha256_of_blob_bytes() {
        let store = MemoryStore::new();
        let env = envelope(3);
        let ptr = store.put(&env).unwrap();
        // recompute independently from the canonical serialization
        let expected = hex::encode(<sha2::Sha256 as sha2::Digest>::digest(
            serialize_envelope(&env),
        ));
        assert_eq!(ptr.locator, expected);
    }

    #[test]
    fn unknown_pointer_is_not_found() {
        let store = MemoryStore::new();
        let ptr = StoragePointer::parse("mem://deadbeef").unwrap();
        assert!(matches!(store.get(&ptr), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn delete_semantics() {
        let store = MemoryStore::new();
        let ptr = store.put(&envelope(1)).unwrap();
        assert!(store.delete(&ptr).unwrap());
        assert!(matches!(store.get(&ptr), Err(StoreError::NotFound(_))));
        assert!(!store.delete(&ptr).unwrap());
    }

    #[test]
    fn export_import_round_trip() {
        let store = MemoryStore::new();
        let ptr = store.put(&envelope(5)).unwrap();
        let restored = MemoryStore::import(store.export());
        assert_eq!(restored.get(&ptr).unwrap(), envelope(5));
    }
}

//! Filesystem store with two-level hex fan-out.
//!
//! A blob with locator `ab cd ...` lands at `<root>/ab/cd/<locator>`, which
//! keeps individual directories small.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{
    deserialize_envelope, locator_for, serialize_envelope, BlobStore, Scheme, StoragePointer,
    StoreError,
};
use crate::crypto::EncryptedEnvelope;

#[derive(Debug)]
pub struct FsStore {
    root: PathBuf,
}

impl FsStore {
    pub fn open<P: AsRef<Path>>(root: P) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        Ok(FsStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_for(&self, locator: &str) -> Result<PathBuf, StoreError> {
        if locator.len() < 4 || !locator.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(StoreError::BadPointer(locator.to_string()));
        }
        Ok(self
            .root
            .join(&locator[0..2])
            .join(&locator[2..4])
            .join(locator))
    }
}

impl BlobStore for FsStore {
    fn put(&self, envelope: &EncryptedEnvelope) -> Result<StoragePointer, StoreError> {
        let bytes = serialize_envelope(envelope);
        let locator = locator_for(&bytes);
        let path = self.path_for(&locator)?;
        if !path.exists() {
            fs::create_dir_all(path.parent().expect("fan-out parent"))?;
            // write-then-rename so concurrent readers never see partial blobs
            let tmp = path.with_extension("tmp");
            {
                let mut file = fs::File::create(&tmp)?;
                file.write_all(&bytes)?;
                file.sync_all()?;
            }
            fs::rename(&tmp, &path)?;
        }
        Ok(StoragePointer {
            scheme: Scheme::File,
            locator,
        })
    }

    fn get(&self, ptr: &StoragePointer) -> Result<EncryptedEnvelope, StoreError> {
        let path = self.path_for(&ptr.locator)?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(ptr.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        deserialize_envelope(&bytes)
    }

    fn delete(&self, ptr: &StoragePointer) -> Result<bool, StoreError> {
        let path = self.path_for(&ptr.locator)?;
        match fs::remove_file(&path) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e.into()),
        }
    }
}

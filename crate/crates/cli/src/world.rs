//! The persisted simulation universe.
//!
//! One world holds the shared key registry, one ledger per patient, the
//! blob store, the simulated clock, all actors, and a single seedable RNG
//! that every random draw flows through — identical command scripts against
//! the same seed replay identically. State splits across two files: the
//! world file (public material only) and the keystore (private keys, nonce
//! journals, cached record keys). Private keys never enter the world file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use phr_core::client::{Actor, ClientError, GrantPackage, GuardianService, Role, RotationOutcome};
use phr_core::crypto::{keccak256, ContentDigest, KeyPair, WrappedKey};
use phr_core::deid::{rewrap_for_research, DeidError, DeidPolicy};
use phr_core::hexfmt;
use phr_core::ledger::{
    EventFilter, GasError, GasModel, GasProfile, LedgerEvent, PatientLedger, SimClock,
};
use phr_core::registry::KeyRegistry;
use phr_core::store::{BlobStore, FsStore, MemoryStore, StoragePointer, StoreError};
use phr_core::types::Address;

pub const WORLD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("{0}")]
    Client(#[from] ClientError),
    #[error("{0}")]
    Deid(#[from] DeidError),
    #[error("{0}")]
    Gas(#[from] GasError),
    #[error("{0}")]
    Store(#[from] StoreError),
    #[error("unknown actor: {0}")]
    UnknownActor(String),
    #[error("actor already exists: {0}")]
    ActorExists(String),
    #[error("no ledger deployed for patient {0}")]
    NoLedger(String),
    #[error("ledger already deployed for patient {0}")]
    LedgerExists(String),
    #[error("no guardian service configured")]
    NoGuardian,
    #[error("world file error: {0}")]
    Persist(String),
    #[error("{0}")]
    Invalid(String),
}

impl From<phr_core::ledger::LedgerError> for WorldError {
    fn from(e: phr_core::ledger::LedgerError) -> Self {
        WorldError::Client(ClientError::Ledger(e))
    }
}

impl From<phr_core::registry::RegistryError> for WorldError {
    fn from(e: phr_core::registry::RegistryError) -> Self {
        WorldError::Client(ClientError::Registry(e))
    }
}

/// Storage backing for a world.
pub enum WorldStore {
    Mem(MemoryStore),
    Fs(FsStore),
}

impl WorldStore {
    pub fn as_blob_store(&self) -> &dyn BlobStore {
        match self {
            WorldStore::Mem(s) => s,
            WorldStore::Fs(s) => s,
        }
    }
}

/// One named participant.
pub struct ActorEntry {
    pub name: String,
    pub actor: Actor,
}

pub struct SimWorld {
    pub seed: u64,
    pub chain_id: u64,
    pub gas_profile: GasProfile,
    pub clock: SimClock,
    pub registry: KeyRegistry,
    pub ledgers: BTreeMap<Address, PatientLedger>,
    pub store: WorldStore,
    pub actors: BTreeMap<String, ActorEntry>,
    pub guardian: Option<GuardianService>,
    pub rng: ChaCha20Rng,
    deployment_counter: u64,
}

impl SimWorld {
    /// Fresh world. `seed: None` draws one from OS entropy.
    pub fn init(
        seed: Option<u64>,
        chain_id: u64,
        gas_profile: GasProfile,
        store: WorldStore,
    ) -> Self {
        let seed = seed.unwrap_or_else(|| rand::rngs::OsRng.next_u64());
        SimWorld {
            seed,
            chain_id,
            gas_profile,
            clock: SimClock::new(0),
            registry: KeyRegistry::new(),
            ledgers: BTreeMap::new(),
            store,
            actors: BTreeMap::new(),
            guardian: None,
            rng: ChaCha20Rng::seed_from_u64(seed),
            deployment_counter: 0,
        }
    }

    fn actor(&self, name: &str) -> Result<&ActorEntry, WorldError> {
        self.actors
            .get(name)
            .ok_or_else(|| WorldError::UnknownActor(name.to_string()))
    }

    fn actor_mut(&mut self, name: &str) -> Result<&mut ActorEntry, WorldError> {
        self.actors
            .get_mut(name)
            .ok_or_else(|| WorldError::UnknownActor(name.to_string()))
    }

    pub fn actor_address(&self, name: &str) -> Result<Address, WorldError> {
        Ok(self.actor(name)?.actor.address())
    }

    fn ledger_of(&mut self, patient_name: &str) -> Result<(Address, &mut PatientLedger), WorldError> {
        let address = self.actor_address(patient_name)?;
        let ledger = self
            .ledgers
            .get_mut(&address)
            .ok_or_else(|| WorldError::NoLedger(patient_name.to_string()))?;
        Ok((address, ledger))
    }

    pub fn ledger_ref(&self, patient_name: &str) -> Result<&PatientLedger, WorldError> {
        let address = self.actor_address(patient_name)?;
        self.ledgers
            .get(&address)
            .ok_or_else(|| WorldError::NoLedger(patient_name.to_string()))
    }

    pub fn create_actor(&mut self, name: &str, role: Role) -> Result<Address, WorldError> {
        if self.actors.contains_key(name) {
            return Err(WorldError::ActorExists(name.to_string()));
        }
        let actor = Actor::new(role, &mut self.rng);
        let address = actor.address();
        self.actors.insert(
            name.to_string(),
            ActorEntry {
                name: name.to_string(),
                actor,
            },
        );
        Ok(address)
    }

    pub fn register_key(&mut self, name: &str) -> Result<u64, WorldError> {
        let entry = self
            .actors
            .get(name)
            .ok_or_else(|| WorldError::UnknownActor(name.to_string()))?;
        Ok(entry.actor.register_encryption_key(&mut self.registry)?)
    }

    pub fn rotate_key(&mut self, name: &str) -> Result<u64, WorldError> {
        let mut registry = std::mem::take(&mut self.registry);
        let rng = &mut self.rng;
        let result = self
            .actors
            .get_mut(name)
            .ok_or_else(|| WorldError::UnknownActor(name.to_string()))
            .and_then(|entry| Ok(entry.actor.rotate_encryption_key(&mut registry, rng)?));
        self.registry = registry;
        result
    }

    /// Deploys the per-patient contract; its synthetic address comes from
    /// the world deployment counter.
    pub fn deploy_ledger(&mut self, patient_name: &str) -> Result<Address, WorldError> {
        let patient = self.actor_address(patient_name)?;
        if self.ledgers.contains_key(&patient) {
            return Err(WorldError::LedgerExists(patient_name.to_string()));
        }
        self.deployment_counter += 1;
        let contract = ledger_address(self.deployment_counter);
        let ledger = PatientLedger::new(
            patient,
            contract,
            self.chain_id,
            self.clock.clone(),
            GasModel::default(),
            self.gas_profile,
        );
        self.ledgers.insert(patient, ledger);
        Ok(contract)
    }

    /// Workflow 1. When a guardian is configured, the record key is also
    /// wrapped for it at creation time (the pre-established envelope key).
    pub fn add_record(
        &mut self,
        patient_name: &str,
        plaintext: &[u8],
    ) -> Result<(u64, StoragePointer, ContentDigest), WorldError> {
        let patient_addr = self.actor_address(patient_name)?;
        let ledger = self
            .ledgers
            .get_mut(&patient_addr)
            .ok_or_else(|| WorldError::NoLedger(patient_name.to_string()))?;
        let guardian = self.guardian.as_mut();
        let entry = self
            .actors
            .get_mut(patient_name)
            .expect("checked by actor_address");
        let store: &dyn BlobStore = match &self.store {
            WorldStore::Mem(s) => s,
            WorldStore::Fs(s) => s,
        };
        let created = entry.actor.create_record(
            ledger,
            &self.registry,
            store,
            plaintext,
            guardian,
            &mut self.rng,
        )?;
        Ok((created.rid, created.ptr, created.digest))
    }

    pub fn get_record(
        &mut self,
        patient_name: &str,
        actor_name: &str,
        rid: u64,
        log_receipt: bool,
    ) -> Result<Vec<u8>, WorldError> {
        let patient_addr = self.actor_address(patient_name)?;
        let ledger = self
            .ledgers
            .get_mut(&patient_addr)
            .ok_or_else(|| WorldError::NoLedger(patient_name.to_string()))?;
        let entry = self
            .actors
            .get(actor_name)
            .ok_or_else(|| WorldError::UnknownActor(actor_name.to_string()))?;
        let store: &dyn BlobStore = match &self.store {
            WorldStore::Mem(s) => s,
            WorldStore::Fs(s) => s,
        };
        Ok(entry.actor.access_record(ledger, store, rid, log_receipt)?)
    }

    /// Content update: Workflow 5 with no carried-over grantees.
    pub fn update_record(
        &mut self,
        patient_name: &str,
        rid: u64,
        plaintext: &[u8],
    ) -> Result<(StoragePointer, ContentDigest), WorldError> {
        let outcome = self.rotate_record(patient_name, rid, plaintext, &[])?;
        Ok((outcome.ptr, outcome.digest))
    }

    pub fn rotate_record(
        &mut self,
        patient_name: &str,
        rid: u64,
        plaintext: &[u8],
        keep_names: &[String],
    ) -> Result<RotationOutcome, WorldError> {
        let mut keeps = Vec::with_capacity(keep_names.len());
        for name in keep_names {
            keeps.push(self.actor_address(name)?);
        }
        let patient_addr = self.actor_address(patient_name)?;
        let ledger = self
            .ledgers
            .get_mut(&patient_addr)
            .ok_or_else(|| WorldError::NoLedger(patient_name.to_string()))?;
        let guardian = self.guardian.as_mut();
        let entry = self
            .actors
            .get_mut(patient_name)
            .expect("checked by actor_address");
        let store: &dyn BlobStore = match &self.store {
            WorldStore::Mem(s) => s,
            WorldStore::Fs(s) => s,
        };
        Ok(entry.actor.rotate_record(
            ledger,
            &self.registry,
            store,
            rid,
            plaintext,
            &keeps,
            guardian,
            &mut self.rng,
        )?)
    }

    pub fn create_grant(
        &mut self,
        patient_name: &str,
        grantee_name: &str,
        rid: u64,
        expiration: u64,
    ) -> Result<GrantPackage, WorldError> {
        let grantee = self.actor_address(grantee_name)?;
        let patient_addr = self.actor_address(patient_name)?;
        let ledger = self
            .ledgers
            .get(&patient_addr)
            .ok_or_else(|| WorldError::NoLedger(patient_name.to_string()))?;
        let entry = self
            .actors
            .get_mut(patient_name)
            .expect("checked by actor_address");
        Ok(entry.actor.grant_access(
            ledger,
            &self.registry,
            rid,
            grantee,
            expiration,
            &mut self.rng,
        )?)
    }

    /// Grantee submission. On success the patient's nonce journal entry is
    /// marked confirmed (the in-process world sees the inclusion).
    pub fn submit_grant(
        &mut self,
        grantee_name: &str,
        patient_name: &str,
        package: &GrantPackage,
    ) -> Result<(), WorldError> {
        let patient_addr = self.actor_address(patient_name)?;
        let ledger = self
            .ledgers
            .get_mut(&patient_addr)
            .ok_or_else(|| WorldError::NoLedger(patient_name.to_string()))?;
        let grantee = self
            .actors
            .get(grantee_name)
            .ok_or_else(|| WorldError::UnknownActor(grantee_name.to_string()))?;
        grantee.actor.submit_grant(ledger, package)?;
        if let Some(patient) = self.actors.get_mut(patient_name) {
            patient.actor.mark_nonce_confirmed(package.nonce);
        }
        Ok(())
    }

    pub fn revoke(
        &mut self,
        patient_name: &str,
        grantee_name: &str,
        rid: u64,
    ) -> Result<(), WorldError> {
        let grantee = self.actor_address(grantee_name)?;
        let (patient_addr, ledger) = self.ledger_of(patient_name)?;
        let _ = patient_addr;
        ledger.revoke_permission(ledger.patient(), rid, grantee)?;
        Ok(())
    }

    pub fn set_emergency_physician(
        &mut self,
        patient_name: &str,
        physician_name: &str,
        enabled: bool,
    ) -> Result<(), WorldError> {
        let physician = self.actor_address(physician_name)?;
        let (_, ledger) = self.ledger_of(patient_name)?;
        ledger.set_emergency_physician(ledger.patient(), physician, enabled)?;
        Ok(())
    }

    /// Emergency grant only (no reads, no confirmation): the guardian
    /// re-wraps for both physicians, both co-sign, physician 1 submits.
    #[allow(clippy::too_many_arguments)]
    pub fn emergency_grant(
        &mut self,
        patient_name: &str,
        physician1_name: &str,
        physician2_name: &str,
        rid: u64,
        justification_code: u8,
        max_skew_seconds: u64,
    ) -> Result<[u8; 32], WorldError> {
        use phr_core::crypto::{hash_typed_emergency, sign_digest, EmergencyRequestMessage};

        let p1 = self.actor(physician1_name)?.actor.address();
        let p2 = self.actor(physician2_name)?.actor.address();
        let patient_addr = self.actor_address(patient_name)?;
        let guardian = self.guardian.as_ref().ok_or(WorldError::NoGuardian)?;
        let ledger = self
            .ledgers
            .get(&patient_addr)
            .ok_or_else(|| WorldError::NoLedger(patient_name.to_string()))?;

        let wrapped1 = guardian.rewrap_for(p1, ledger.address(), rid, &self.registry, &mut self.rng)?;
        let wrapped2 = guardian.rewrap_for(p2, ledger.address(), rid, &self.registry, &mut self.rng)?;

        let request_time = ledger.now();
        let request = EmergencyRequestMessage {
            record_id: rid,
            justification_code,
            request_time,
            max_skew_seconds,
        };
        let hash = hash_typed_emergency(ledger.domain(), &request);
        let sig1 = sign_digest(self.actor(physician1_name)?.actor.signing_keypair(), &hash);
        let sig2 = sign_digest(self.actor(physician2_name)?.actor.signing_keypair(), &hash);

        let ledger = self
            .ledgers
            .get_mut(&patient_addr)
            .expect("checked above");
        Ok(ledger.emergency_grant_access(
            p1,
            rid,
            p2,
            justification_code,
            request_time,
            max_skew_seconds,
            &wrapped1.to_bytes(),
            &wrapped2.to_bytes(),
            &sig1,
            &sig2,
        )?)
    }

    pub fn emergency_confirm(
        &mut self,
        patient_name: &str,
        physician_name: &str,
        grant_id: [u8; 32],
        justification_text: &str,
    ) -> Result<(), WorldError> {
        let physician = self.actor_address(physician_name)?;
        let (_, ledger) = self.ledger_of(patient_name)?;
        ledger.confirm_emergency_access(
            physician,
            grant_id,
            keccak256(justification_text.as_bytes()),
        )?;
        Ok(())
    }

    pub fn query_events(
        &self,
        patient_name: &str,
        filter: &EventFilter,
    ) -> Result<Vec<LedgerEvent>, WorldError> {
        Ok(self.ledger_ref(patient_name)?.query_events(filter))
    }

    pub fn advance_clock(&mut self, seconds: u64) {
        self.clock.advance(seconds);
    }

    pub fn guardian_init(&mut self) -> Result<Address, WorldError> {
        if self.guardian.is_some() {
            return Err(WorldError::Invalid("guardian already configured".into()));
        }
        let service = GuardianService::new(&mut self.rng);
        let address = service.keypair().address();
        self.guardian = Some(service);
        Ok(address)
    }

    pub fn guardian_staff(&mut self, name: &str, add: bool) -> Result<(), WorldError> {
        let address = self.actor_address(name)?;
        let guardian = self.guardian.as_mut().ok_or(WorldError::NoGuardian)?;
        if add {
            guardian.add_staff(address);
        } else {
            guardian.remove_staff(address);
        }
        Ok(())
    }

    pub fn deid_rewrap(
        &mut self,
        patient_name: &str,
        rid: u64,
        policy: &DeidPolicy,
        consortium_key_hex: &str,
    ) -> Result<(StoragePointer, WrappedKey), WorldError> {
        use phr_core::crypto::PublicKey;
        let bytes = hexfmt::decode(consortium_key_hex)
            .map_err(|e| WorldError::Invalid(format!("consortium key: {}", e)))?;
        let consortium = PublicKey::from_uncompressed(&bytes)
            .map_err(|e| WorldError::Invalid(format!("consortium key: {}", e)))?;
        let patient_addr = self.actor_address(patient_name)?;
        let ledger = self
            .ledgers
            .get_mut(&patient_addr)
            .ok_or_else(|| WorldError::NoLedger(patient_name.to_string()))?;
        let entry = self
            .actors
            .get_mut(patient_name)
            .expect("checked by actor_address");
        let store: &dyn BlobStore = match &self.store {
            WorldStore::Mem(s) => s,
            WorldStore::Fs(s) => s,
        };
        Ok(rewrap_for_research(
            &mut entry.actor,
            ledger,
            store,
            rid,
            policy,
            &consortium,
            &mut self.rng,
        )?)
    }

    // --- persistence -------------------------------------------------------

    pub fn save(&self, world_path: &Path, keystore_path: &Path) -> Result<(), WorldError> {
        let world = WorldFile::from_world(self);
        let keystore = KeystoreFile::from_world(self);
        write_json(world_path, &world)?;
        write_json(keystore_path, &keystore)?;
        Ok(())
    }

    pub fn load(world_path: &Path, keystore_path: &Path) -> Result<Self, WorldError> {
        let world: WorldFile = read_json(world_path)?;
        let keystore: KeystoreFile = read_json(keystore_path)?;
        WorldFile::into_world(world, keystore)
    }
}

/// Synthetic contract address from the deployment counter.
fn ledger_address(counter: u64) -> Address {
    let mut buf = b"phr-ledger:".to_vec();
    buf.extend_from_slice(&counter.to_be_bytes());
    let hash = keccak256(&buf);
    let mut addr = [0u8; 20];
    addr.copy_from_slice(&hash[12..]);
    Address(addr)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), WorldError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| WorldError::Persist(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| WorldError::Persist(format!("{}: {}", path.display(), e)))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, WorldError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| WorldError::Persist(format!("{}: {}", path.display(), e)))?;
    serde_json::from_str(&text).map_err(|e| WorldError::Persist(format!("{}: {}", path.display(), e)))
}

// --- on-disk schema --------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct WorldFile {
    version: u32,
    seed: u64,
    chain_id: u64,
    gas_profile: GasProfile,
    clock_now: u64,
    deployment_counter: u64,
    registry: KeyRegistry,
    ledgers: BTreeMap<Address, PatientLedger>,
    store: StoreFile,
    actors: BTreeMap<String, ActorPublic>,
    guardian: Option<GuardianPublic>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
enum StoreFile {
    Mem {
        /// locator → blob bytes, hex encoded
        blobs: Vec<(String, String)>,
    },
    File {
        root: PathBuf,
    },
}

#[derive(Serialize, Deserialize)]
struct ActorPublic {
    role: Role,
    address: Address,
    signing_public: String,
    encryption_public: String,
}

#[derive(Serialize, Deserialize)]
struct GuardianPublic {
    address: Address,
    staff: Vec<Address>,
}

#[derive(Serialize, Deserialize)]
struct KeystoreFile {
    version: u32,
    /// ChaCha20 stream position, serialized as a string (u128).
    rng_word_pos: String,
    rng_seed: u64,
    actors: BTreeMap<String, ActorSecret>,
    guardian: Option<GuardianSecret>,
}

#[derive(Serialize, Deserialize)]
struct ActorSecret {
    signing_private: String,
    encryption_private: String,
    retired_encryption: Vec<String>,
    nonce_journal: Vec<String>,
    nonces_consumed: Vec<String>,
    /// `(ledger hex, rid, key hex)` triples.
    key_cache: Vec<(String, u64, String)>,
}

#[derive(Serialize, Deserialize)]
struct GuardianSecret {
    private: String,
    /// `(ledger hex, rid, wrapped key hex)` triples.
    envelope_keys: Vec<(String, u64, String)>,
}

impl WorldFile {
    fn from_world(w: &SimWorld) -> Self {
        WorldFile {
            version: WORLD_SCHEMA_VERSION,
            seed: w.seed,
            chain_id: w.chain_id,
            gas_profile: w.gas_profile,
            clock_now: w.clock.now(),
            deployment_counter: w.deployment_counter,
            registry: w.registry.clone(),
            ledgers: w.ledgers.clone(),
            store: match &w.store {
                WorldStore::Mem(s) => StoreFile::Mem {
                    blobs: s
                        .export()
                        .into_iter()
                        .map(|(locator, bytes)| (locator, hex::encode(bytes)))
                        .collect(),
                },
                WorldStore::Fs(s) => StoreFile::File {
                    root: s.root().to_path_buf(),
                },
            },
            actors: w
                .actors
                .iter()
                .map(|(name, entry)| {
                    (
                        name.clone(),
                        ActorPublic {
                            role: entry.actor.role(),
                            address: entry.actor.address(),
                            signing_public: hexfmt::encode(
                                entry.actor.signing_keypair().public().to_uncompressed(),
                            ),
                            encryption_public: hexfmt::encode(
                                entry.actor.encryption_keypair().public().to_uncompressed(),
                            ),
                        },
                    )
                })
                .collect(),
            guardian: w.guardian.as_ref().map(|g| GuardianPublic {
                address: g.keypair().address(),
                staff: g.staff().copied().collect(),
            }),
        }
    }

    fn into_world(self, keystore: KeystoreFile) -> Result<SimWorld, WorldError> {
        if self.version != WORLD_SCHEMA_VERSION {
            return Err(WorldError::Persist(format!(
                "unsupported world schema version {}",
                self.version
            )));
        }
        let clock = SimClock::new(self.clock_now);

        let mut ledgers = self.ledgers;
        for ledger in ledgers.values_mut() {
            ledger.attach_clock(clock.clone());
        }

        let store = match self.store {
            StoreFile::Mem { blobs } => {
                let entries = blobs
                    .into_iter()
                    .map(|(locator, hex_bytes)| {
                        hexfmt::decode(&hex_bytes)
                            .map(|bytes| (locator, bytes))
                            .map_err(|e| WorldError::Persist(e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                WorldStore::Mem(MemoryStore::import(entries))
            }
            StoreFile::File { root } => WorldStore::Fs(FsStore::open(root)?),
        };

        let mut actors = BTreeMap::new();
        for (name, public) in self.actors {
            let secret = keystore
                .actors
                .get(&name)
                .ok_or_else(|| WorldError::Persist(format!("keystore missing actor {}", name)))?;
            let actor = secret.restore(public.role)?;
            if actor.address() != public.address {
                return Err(WorldError::Persist(format!(
                    "keystore/world mismatch for actor {}",
                    name
                )));
            }
            actors.insert(
                name.clone(),
                ActorEntry { name, actor },
            );
        }

        let guardian = match (self.guardian, keystore.guardian) {
            (Some(public), Some(secret)) => {
                let mut service = GuardianService::from_keypair(parse_keypair(&secret.private)?);
                for addr in public.staff {
                    service.add_staff(addr);
                }
                for (ledger_hex, rid, wrapped_hex) in &secret.envelope_keys {
                    let ledger = Address::from_hex(ledger_hex)
                        .map_err(WorldError::Persist)?;
                    let wrapped = WrappedKey::from_bytes(
                        &hexfmt::decode(wrapped_hex).map_err(|e| WorldError::Persist(e.to_string()))?,
                    )
                    .map_err(|e| WorldError::Persist(e.to_string()))?;
                    service.store_envelope_key(ledger, *rid, wrapped);
                }
                Some(service)
            }
            (None, None) => None,
            _ => {
                return Err(WorldError::Persist(
                    "guardian present in only one of world/keystore".into(),
                ))
            }
        };

        let word_pos: u128 = keystore
            .rng_word_pos
            .parse()
            .map_err(|_| WorldError::Persist("bad rng position".into()))?;
        let mut rng = ChaCha20Rng::seed_from_u64(keystore.rng_seed);
        rng.set_word_pos(word_pos);

        Ok(SimWorld {
            seed: self.seed,
            chain_id: self.chain_id,
            gas_profile: self.gas_profile,
            clock,
            registry: self.registry,
            ledgers,
            store,
            actors,
            guardian,
            rng,
            deployment_counter: self.deployment_counter,
        })
    }
}

impl KeystoreFile {
    fn from_world(w: &SimWorld) -> Self {
        KeystoreFile {
            version: WORLD_SCHEMA_VERSION,
            rng_word_pos: w.rng.get_word_pos().to_string(),
            rng_seed: w.seed,
            actors: w
                .actors
                .iter()
                .map(|(name, entry)| (name.clone(), ActorSecret::from_actor(&entry.actor)))
                .collect(),
            guardian: w.guardian.as_ref().map(|g| GuardianSecret {
                private: hexfmt::encode(g.keypair().secret_bytes()),
                envelope_keys: g
                    .envelope_keys()
                    .map(|((ledger, rid), wrapped)| (ledger.to_hex(), *rid, wrapped.to_hex()))
                    .collect(),
            }),
        }
    }
}

impl ActorSecret {
    fn from_actor(actor: &Actor) -> Self {
        ActorSecret {
            signing_private: hexfmt::encode(actor.signing_keypair().secret_bytes()),
            encryption_private: hexfmt::encode(actor.encryption_keypair().secret_bytes()),
            retired_encryption: actor
                .retired_encryption_keypairs()
                .iter()
                .map(|kp| hexfmt::encode(kp.secret_bytes()))
                .collect(),
            nonce_journal: actor.nonce_journal().iter().map(hexfmt::encode).collect(),
            nonces_consumed: actor.nonces_consumed().iter().map(hexfmt::encode).collect(),
            key_cache: Vec::new(),
        }
    }

    fn restore(&self, role: Role) -> Result<Actor, WorldError> {
        let signing = parse_keypair(&self.signing_private)?;
        let encryption = parse_keypair(&self.encryption_private)?;
        let retired = self
            .retired_encryption
            .iter()
            .map(|s| parse_keypair(s))
            .collect::<Result<Vec<_>, _>>()?;
        let journal = self
            .nonce_journal
            .iter()
            .map(|s| hexfmt::decode_array::<32>(s).map_err(WorldError::Persist))
            .collect::<Result<std::collections::BTreeSet<_>, _>>()?;
        let consumed = self
            .nonces_consumed
            .iter()
            .map(|s| hexfmt::decode_array::<32>(s).map_err(WorldError::Persist))
            .collect::<Result<std::collections::BTreeSet<_>, _>>()?;
        Ok(Actor::from_parts(
            role, signing, encryption, retired, journal, consumed,
        ))
    }
}

fn parse_keypair(hex_secret: &str) -> Result<KeyPair, WorldError> {
    let bytes = hexfmt::decode_array::<32>(hex_secret).map_err(WorldError::Persist)?;
    KeyPair::from_secret_bytes(&bytes).map_err(|e| WorldError::Persist(e.to_string()))
}

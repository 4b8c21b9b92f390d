//! Patient-controlled health record sharing, desk scale.
//!
//! Encrypted FHIR bundles live in an off-chain blob store; an in-process
//! ledger simulation plays the role of the per-patient authorization
//! contract. Clients tie the two together: they encrypt records, wrap keys
//! for recipients, sign time-bounded grants as typed data, and verify
//! content digests before ever attempting decryption.
//!
//! Module map:
//!
//! * [`crypto`] — AEAD envelopes, composite digests, ECIES key wrapping,
//!   typed-data signing and recovery on secp256k1.
//! * [`registry`] — versioned public-key registry for all participants.
//! * [`ledger`] — the per-patient authorization state machine with an
//!   append-only event log, simulated clock, and gas accounting.
//! * [`store`] — content-addressed blob stores (memory and filesystem).
//! * [`client`] — actor workflows: create, grant, access, revoke, rotate,
//!   emergency access, and the institutional guardian re-wrap.
//! * [`deid`] — Safe Harbor de-identification and k-anonymity reporting.

pub mod client;
pub mod crypto;
pub mod deid;
pub mod hexfmt;
pub mod ledger;
pub mod registry;
pub mod store;
pub mod types;

pub use types::Address;

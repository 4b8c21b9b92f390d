//! Safe Harbor de-identification over FHIR JSON bundles.
//!
//! The pipeline strips or transforms every policy-matched identifier field,
//! shifts clinical dates by a constant per-patient offset (intervals inside
//! one bundle are preserved), truncates ZIP codes to three digits, and tags
//! the output bundle so a second pass is a no-op. A brute-force k-anonymity
//! checker reports re-identification risk over quasi-identifier tuples.

mod kanon;
mod policy;

pub use kanon::{k_anonymity, KAnonymityReport};
pub use policy::{Action, DeidPolicy, PathRule, SafeHarborCategory};

use chrono::{Duration, NaiveDate};
use k256::elliptic_curve::rand_core::CryptoRngCore;
use rand::RngCore;
use serde_json::Value;
use thiserror::Error;

use crate::client::{Actor, ClientError};
use crate::crypto::{
    compute_digest, encrypt_record, generate_symmetric_key, wrap_key, PublicKey, WrappedKey,
    AD_MINIMAL,
};
use crate::ledger::PatientLedger;
use crate::store::{BlobStore, StoragePointer};

#[derive(Debug, Error)]
pub enum DeidError {
    #[error("bundle parse error: {0}")]
    Parse(String),
    #[error("policy error: {0}")]
    Policy(String),
    #[error("k-anonymity requires at least one record")]
    EmptyInput,
    #[error("{0}")]
    Client(#[from] ClientError),
}

const DEID_TAG_SYSTEM: &str = "urn:phr:deid";
const DEID_TAG_CODE: &str = "DEIDENTIFIED";

/// A parsed FHIR bundle (or a single resource). No schema enforcement
/// beyond well-formed JSON with an object root.
#[derive(Clone, PartialEq, Debug)]
pub struct FhirBundle(Value);

impl FhirBundle {
    pub fn parse(text: &str) -> Result<Self, DeidError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| DeidError::Parse(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, DeidError> {
        if !value.is_object() {
            return Err(DeidError::Parse("bundle root must be a JSON object".into()));
        }
        Ok(FhirBundle(value))
    }

    pub fn as_value(&self) -> &Value {
        &self.0
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.0).expect("bundle serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.0).expect("bundle serializes")
    }

    /// Immutable views of the resources: `entry[].resource` for bundles,
    /// the root object otherwise.
    pub fn resources(&self) -> Vec<&Value> {
        match self.0.get("entry").and_then(Value::as_array) {
            Some(entries) => entries
                .iter()
                .filter_map(|e| e.get("resource"))
                .collect(),
            None => vec![&self.0],
        }
    }

    fn resources_mut(value: &mut Value) -> Vec<&mut Value> {
        // split borrow: either the entries' resources or the root itself
        let has_entries = value.get("entry").map(|e| e.is_array()).unwrap_or(false);
        if has_entries {
            value["entry"]
                .as_array_mut()
                .expect("checked above")
                .iter_mut()
                .filter_map(|e| e.get_mut("resource"))
                .collect()
        } else {
            vec![value]
        }
    }

    /// Whether this bundle already went through the pipeline.
    pub fn is_deidentified(&self) -> bool {
        self.0
            .get("meta")
            .and_then(|m| m.get("security"))
            .and_then(Value::as_array)
            .map(|tags| {
                tags.iter().any(|t| {
                    t.get("code").and_then(Value::as_str) == Some(DEID_TAG_CODE)
                })
            })
            .unwrap_or(false)
    }

    /// The key the date shift is derived from: the Patient resource id,
    /// falling back to the bundle id.
    pub fn patient_key(&self) -> String {
        for resource in self.resources() {
            if resource.get("resourceType").and_then(Value::as_str) == Some("Patient") {
                if let Some(id) = resource.get("id").and_then(Value::as_str) {
                    return id.to_string();
                }
            }
        }
        self.0
            .get("id")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string()
    }

    /// Extracts the policy's quasi-identifier tuple from the Patient
    /// resource (post-generalization values: birth year, gender, ZIP3).
    /// Missing fields become empty strings.
    pub fn quasi_identifiers(&self, policy: &DeidPolicy) -> Vec<String> {
        let patient = self
            .resources()
            .into_iter()
            .find(|r| r.get("resourceType").and_then(Value::as_str) == Some("Patient"));
        policy
            .quasi_identifiers
            .iter()
            .map(|path| {
                patient
                    .and_then(|p| lookup_first(p, &path.split('.').collect::<Vec<_>>()))
                    .unwrap_or_default()
            })
            .collect()
    }
}

/// Applies the policy to every resource. Idempotent: an already-tagged
/// bundle is returned unchanged.
pub fn deidentify(bundle: &FhirBundle, policy: &DeidPolicy) -> Result<FhirBundle, DeidError> {
    policy.validate()?;
    if bundle.is_deidentified() {
        return Ok(bundle.clone());
    }

    let shift_days = policy.shift_for(&bundle.patient_key());
    let mut value = bundle.0.clone();

    for resource in FhirBundle::resources_mut(&mut value) {
        let resource_type = resource
            .get("resourceType")
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string();
        for rule in &policy.rules {
            let Some((pattern, segments)) = rule.split() else {
                continue;
            };
            if pattern != "*" && pattern != resource_type {
                continue;
            }
            apply_rule(resource, &segments, rule.action, shift_days);
        }
    }

    mark_deidentified(&mut value);
    Ok(FhirBundle(value))
}

fn mark_deidentified(value: &mut Value) {
    let meta = value
        .as_object_mut()
        .expect("bundle root is an object")
        .entry("meta")
        .or_insert_with(|| Value::Object(Default::default()));
    if !meta.is_object() {
        *meta = Value::Object(Default::default());
    }
    let security = meta
        .as_object_mut()
        .unwrap()
        .entry("security")
        .or_insert_with(|| Value::Array(Vec::new()));
    if let Some(tags) = security.as_array_mut() {
        tags.push(serde_json::json!({
            "system": DEID_TAG_SYSTEM,
            "code": DEID_TAG_CODE,
        }));
    }
}

/// Walks `segments` through objects (arrays are transparent) and applies
/// the action at the final key.
fn apply_rule(value: &mut Value, segments: &[&str], action: Action, shift_days: i64) {
    match value {
        Value::Array(items) => {
            for item in items {
                apply_rule(item, segments, action, shift_days);
            }
        }
        Value::Object(map) => {
            let key = segments[0];
            if segments.len() == 1 {
                match action {
                    Action::Remove => {
                        map.remove(key);
                    }
                    Action::GeneralizeZip3 => {
                        if let Some(v) = map.get_mut(key) {
                            transform_string(v, &|s| s.chars().take(3).collect());
                        }
                    }
                    Action::YearOnly => {
                        if let Some(v) = map.get_mut(key) {
                            transform_string(v, &year_only);
                        }
                    }
                    Action::ShiftDays => {
                        if let Some(v) = map.get_mut(key) {
                            transform_string(v, &|s| shift_date(s, shift_days));
                        }
                    }
                }
            } else if let Some(child) = map.get_mut(key) {
                apply_rule(child, &segments[1..], action, shift_days);
            }
        }
        _ => {}
    }
}

fn transform_string(value: &mut Value, f: &dyn Fn(&str) -> String) {
    match value {
        Value::String(s) => *s = f(s),
        Value::Array(items) => {
            for item in items {
                transform_string(item, f);
            }
        }
        _ => {}
    }
}

fn year_only(date: &str) -> String {
    if date.len() >= 4 && date.as_bytes()[..4].iter().all(u8::is_ascii_digit) {
        date[..4].to_string()
    } else {
        date.to_string()
    }
}

/// Shifts `YYYY-MM-DD` and `YYYY-MM-DDT...` values by `days`; year-only and
/// year-month values pass through untouched (there is no day to shift).
fn shift_date(value: &str, days: i64) -> String {
    let (date_part, rest) = match value.split_once('T') {
        Some((d, r)) => (d, Some(r)),
        None => (value, None),
    };
    let Ok(date) = NaiveDate::parse_from_str(date_part, "%Y-%m-%d") else {
        return value.to_string();
    };
    let shifted = date + Duration::days(days);
    match rest {
        Some(r) => format!("{}T{}", shifted.format("%Y-%m-%d"), r),
        None => shifted.format("%Y-%m-%d").to_string(),
    }
}

/// First string value at a dotted path, descending through arrays.
fn lookup_first(value: &Value, segments: &[&str]) -> Option<String> {
    match value {
        Value::Array(items) => items.iter().find_map(|i| lookup_first(i, segments)),
        Value::Object(map) => {
            let child = map.get(segments[0])?;
            if segments.len() == 1 {
                match child {
                    Value::String(s) => Some(s.clone()),
                    Value::Array(items) => items
                        .iter()
                        .find_map(|i| i.as_str().map(str::to_string)),
                    other => Some(other.to_string()),
                }
            } else {
                lookup_first(child, &segments[1..])
            }
        }
        _ => None,
    }
}

/// Research release: decrypt, de-identify, re-encrypt under a fresh key
/// wrapped for the consortium, and store as a new blob. The original record
/// and its ledger entry are untouched.
pub fn rewrap_for_research(
    patient: &mut Actor,
    ledger: &mut PatientLedger,
    store: &dyn BlobStore,
    rid: u64,
    policy: &DeidPolicy,
    consortium_public: &PublicKey,
    rng: &mut (impl CryptoRngCore + RngCore),
) -> Result<(StoragePointer, WrappedKey), DeidError> {
    let plaintext = patient.access_record(ledger, store, rid, false)?;
    let text = String::from_utf8(plaintext)
        .map_err(|_| DeidError::Parse("record plaintext is not UTF-8 JSON".into()))?;
    let bundle = FhirBundle::parse(&text)?;
    let cleaned = deidentify(&bundle, policy)?;

    let fresh = generate_symmetric_key(rng).map_err(ClientError::Crypto)?;
    let envelope = encrypt_record(&fresh, cleaned.to_json_string().as_bytes(), AD_MINIMAL, rng)
        .map_err(ClientError::Crypto)?;
    let ptr = store.put(&envelope).map_err(ClientError::Store)?;
    let _ = compute_digest(&envelope);
    let wrapped = wrap_key(consortium_public, &fresh, rng).map_err(ClientError::Crypto)?;
    Ok((ptr, wrapped))
}

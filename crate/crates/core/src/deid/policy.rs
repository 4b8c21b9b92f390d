//! De-identification policy: path rules, actions, and the Safe Harbor
//! category coverage check.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DeidError;

/// The 18 Safe Harbor identifier categories.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SafeHarborCategory {
    Names,
    GeographicSubdivisions,
    Dates,
    PhoneNumbers,
    FaxNumbers,
    EmailAddresses,
    SocialSecurityNumbers,
    MedicalRecordNumbers,
    HealthPlanNumbers,
    AccountNumbers,
    CertificateLicenseNumbers,
    VehicleIdentifiers,
    DeviceIdentifiers,
    Urls,
    IpAddresses,
    BiometricIdentifiers,
    FullFacePhotos,
    OtherUniqueIdentifiers,
}

impl SafeHarborCategory {
    pub const ALL: [SafeHarborCategory; 18] = [
        SafeHarborCategory::Names,
        SafeHarborCategory::GeographicSubdivisions,
        SafeHarborCategory::Dates,
        SafeHarborCategory::PhoneNumbers,
        SafeHarborCategory::FaxNumbers,
        SafeHarborCategory::EmailAddresses,
        SafeHarborCategory::SocialSecurityNumbers,
        SafeHarborCategory::MedicalRecordNumbers,
        SafeHarborCategory::HealthPlanNumbers,
        SafeHarborCategory::AccountNumbers,
        SafeHarborCategory::CertificateLicenseNumbers,
        SafeHarborCategory::VehicleIdentifiers,
        SafeHarborCategory::DeviceIdentifiers,
        SafeHarborCategory::Urls,
        SafeHarborCategory::IpAddresses,
        SafeHarborCategory::BiometricIdentifiers,
        SafeHarborCategory::FullFacePhotos,
        SafeHarborCategory::OtherUniqueIdentifiers,
    ];
}

/// What to do with a matched field.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    /// Drop the field entirely.
    Remove,
    /// Keep the first three ZIP digits.
    GeneralizeZip3,
    /// Keep only the year of a date.
    YearOnly,
    /// Shift the date by the patient's constant offset.
    ShiftDays,
}

/// One rule: a dotted path (`<ResourceType|*>.field.subfield`), an action,
/// and the categories it enforces. Arrays along the path are transparent.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct PathRule {
    pub path: String,
    pub action: Action,
    pub categories: Vec<SafeHarborCategory>,
}

impl PathRule {
    fn new(path: &str, action: Action, categories: &[SafeHarborCategory]) -> Self {
        PathRule {
            path: path.to_string(),
            action,
            categories: categories.to_vec(),
        }
    }

    /// Splits into (resource pattern, field segments).
    pub(super) fn split(&self) -> Option<(&str, Vec<&str>)> {
        let mut parts = self.path.split('.');
        let resource = parts.next()?;
        let segments: Vec<&str> = parts.collect();
        if segments.is_empty() {
            return None;
        }
        Some((resource, segments))
    }
}

/// The full policy: identifier rules, the quasi-identifier set used for
/// k-anonymity extraction, and the per-patient date-shift parameters.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct DeidPolicy {
    pub rules: Vec<PathRule>,
    /// Quasi-identifier extraction paths (over the Patient resource).
    pub quasi_identifiers: Vec<String>,
    /// Shift drawn per patient from `[-date_shift_range_days, +date_shift_range_days]`.
    pub date_shift_range_days: i64,
    pub seed: u64,
}

impl DeidPolicy {
    pub fn from_json(text: &str) -> Result<Self, DeidError> {
        serde_json::from_str(text).map_err(|e| DeidError::Policy(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    /// Every Safe Harbor category must be enforced by at least one rule.
    pub fn validate(&self) -> Result<(), DeidError> {
        for category in SafeHarborCategory::ALL {
            if !self
                .rules
                .iter()
                .any(|r| r.categories.contains(&category))
            {
                return Err(DeidError::Policy(format!(
                    "no rule covers category {:?}",
                    category
                )));
            }
        }
        Ok(())
    }

    /// The per-patient day shift: constant for one patient key, so every
    /// interval inside a bundle is preserved.
    pub fn shift_for(&self, patient_key: &str) -> i64 {
        if self.date_shift_range_days == 0 {
            return 0;
        }
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_be_bytes());
        hasher.update(patient_key.as_bytes());
        let digest = hasher.finalize();
        let raw = u64::from_be_bytes(digest[..8].try_into().unwrap());
        let span = (2 * self.date_shift_range_days + 1) as u64;
        (raw % span) as i64 - self.date_shift_range_days
    }
}

impl Default for DeidPolicy {
    /// Safe Harbor defaults over common FHIR R4 fields.
    fn default() -> Self {
        use Action::*;
        use SafeHarborCategory::*;
        DeidPolicy {
            rules: vec![
                PathRule::new("Patient.name", Remove, &[Names]),
                PathRule::new(
                    "Patient.contact",
                    Remove,
                    &[Names, PhoneNumbers, OtherUniqueIdentifiers],
                ),
                PathRule::new("*.address.line", Remove, &[GeographicSubdivisions]),
                PathRule::new("*.address.city", Remove, &[GeographicSubdivisions]),
                PathRule::new("*.address.district", Remove, &[GeographicSubdivisions]),
                PathRule::new(
                    "*.address.postalCode",
                    GeneralizeZip3,
                    &[GeographicSubdivisions],
                ),
                PathRule::new("*.birthDate", YearOnly, &[Dates]),
                PathRule::new("Patient.deceasedDateTime", YearOnly, &[Dates]),
                PathRule::new("*.effectiveDateTime", ShiftDays, &[Dates]),
                PathRule::new("*.issued", ShiftDays, &[Dates]),
                PathRule::new("*.authoredOn", ShiftDays, &[Dates]),
                PathRule::new("*.onsetDateTime", ShiftDays, &[Dates]),
                PathRule::new("*.recordedDate", ShiftDays, &[Dates]),
                PathRule::new("*.performedDateTime", ShiftDays, &[Dates]),
                PathRule::new("*.occurrenceDateTime", ShiftDays, &[Dates]),
                PathRule::new("*.period.start", ShiftDays, &[Dates]),
                PathRule::new("*.period.end", ShiftDays, &[Dates]),
                PathRule::new(
                    "*.telecom",
                    Remove,
                    &[PhoneNumbers, FaxNumbers, EmailAddresses, Urls],
                ),
                PathRule::new(
                    "*.identifier",
                    Remove,
                    &[
                        SocialSecurityNumbers,
                        MedicalRecordNumbers,
                        HealthPlanNumbers,
                        AccountNumbers,
                        CertificateLicenseNumbers,
                        VehicleIdentifiers,
                        OtherUniqueIdentifiers,
                    ],
                ),
                PathRule::new("Device.udiCarrier", Remove, &[DeviceIdentifiers]),
                PathRule::new("Device.serialNumber", Remove, &[DeviceIdentifiers]),
                PathRule::new("Device.distinctIdentifier", Remove, &[DeviceIdentifiers]),
                PathRule::new("Device.url", Remove, &[IpAddresses, Urls]),
                PathRule::new("*.photo", Remove, &[FullFacePhotos, BiometricIdentifiers]),
                PathRule::new(
                    "DocumentReference.content",
                    Remove,
                    &[Urls, OtherUniqueIdentifiers],
                ),
                PathRule::new(
                    "*.extension",
                    Remove,
                    &[
                        BiometricIdentifiers,
                        VehicleIdentifiers,
                        IpAddresses,
                        OtherUniqueIdentifiers,
                    ],
                ),
            ],
            quasi_identifiers: vec![
                "birthDate".into(),
                "gender".into(),
                "address.postalCode".into(),
            ],
            date_shift_range_days: 365,
            seed: 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_policy_covers_all_18_categories() {
        DeidPolicy::default().validate().unwrap();
    }

    #[test]
    fn incomplete_policy_fails_validation() {
        let mut policy = DeidPolicy::default();
        policy.rules.retain(|r| !r.categories.contains(&SafeHarborCategory::Names));
        assert!(policy.validate().is_err());
    }

    #[test]
    fn shift_is_constant_per_patient_and_in_range() {
        let policy = DeidPolicy::default();
        let a = policy.shift_for("patient-a");
        assert_eq!(a, policy.shift_for("patient-a"));
        assert!(a.abs() <= policy.date_shift_range_days);
        // different patients generally land on different shifts
        let distinct: std::collections::HashSet<i64> = (0..50)
            .map(|i| policy.shift_for(&format!("p{}", i)))
            .collect();
        assert!(distinct.len() > 10);
    }

    #[test]
    fn policy_json_round_trip() {
        let policy = DeidPolicy::default();
        let parsed = DeidPolicy::from_json(&policy.to_json()).unwrap();
        assert_eq!(parsed, policy);
    }
}

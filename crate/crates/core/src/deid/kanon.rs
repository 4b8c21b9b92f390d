//! Brute-force k-anonymity checking.
//!
//! Exact equivalence-class computation by grouping quasi-identifier tuples.
//! At desk scale (≤ tens of thousands of rows) the hash-group pass is
//! plenty; the test suite cross-checks it against a naive double loop.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::DeidError;

/// Result of a k-anonymity evaluation.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct KAnonymityReport {
    /// The k the caller asked for.
    pub k_requested: usize,
    /// Smallest equivalence-class size found.
    pub k_min: usize,
    /// Number of distinct equivalence classes.
    pub class_count: usize,
    /// Histogram: class size → number of classes of that size.
    pub class_sizes: BTreeMap<usize, usize>,
    /// `1 / k_min`.
    pub max_risk: f64,
    /// Mean of `1 / class_size` over all records.
    pub avg_risk: f64,
    /// Whether `k_min >= k_requested`.
    pub meets_threshold: bool,
}

/// Groups records by their quasi-identifier tuple and reports class sizes
/// and re-identification risk.
pub fn k_anonymity(records: &[Vec<String>], k: usize) -> Result<KAnonymityReport, DeidError> {
    if records.is_empty() {
        return Err(DeidError::EmptyInput);
    }
    let mut classes: HashMap<&[String], usize> = HashMap::new();
    for record in records {
        *classes.entry(record.as_slice()).or_insert(0) += 1;
    }

    let k_min = *classes.values().min().expect("nonempty");
    let mut class_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &size in classes.values() {
        *class_sizes.entry(size).or_insert(0) += 1;
    }
    let avg_risk = records
        .iter()
        .map(|r| 1.0 / classes[r.as_slice()] as f64)
        .sum::<f64>()
        / records.len() as f64;

    Ok(KAnonymityReport {
        k_requested: k,
        k_min,
        class_count: classes.len(),
        class_sizes,
        max_risk: 1.0 / k_min as f64,
        avg_risk,
        meets_threshold: k_min >= k,
    })
}

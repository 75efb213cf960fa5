use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::ingest::{DocumentKey, Field, RawTransaction};
use crate::money::Money;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleansePolicy {
    /// Fill value for absent vendor / customer codes.
    pub sentinel: String,
    /// Multiplier on the median absolute deviation for the outlier bound.
    pub outlier_k: f64,
}

impl Default for CleansePolicy {
    fn default() -> Self {
        CleansePolicy { sentinel: "#".to_string(), outlier_k: 6.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlierFlag {
    pub key: DocumentKey,
    pub field: Field,
    pub value: Money,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanseReport {
    pub duplicates_removed: usize,
    pub missing_filled: usize,
    pub outliers_flagged: Vec<OutlierFlag>,
}

/// Cleansing pass over defaulted transactions.
///
/// In order: absent vendor/customer codes get the policy sentinel, exact
/// duplicates collapse to their first occurrence, and amounts with
/// `|x - median| > k * MAD` within their G/L account are flagged. Flagged
/// rows stay in the output.
pub fn cleanse(
    rows: Vec<RawTransaction>,
    policy: &CleansePolicy,
) -> (Vec<RawTransaction>, CleanseReport) {
    let mut report = CleanseReport::default();
    let mut seen = HashSet::with_capacity(rows.len());
    let mut out = Vec::with_capacity(rows.len());
    for mut r in rows {
        for slot in [&mut r.vendor, &mut r.customer] {
            if slot.as_deref().map_or(true, |s| s.trim().is_empty()) {
                *slot = Some(policy.sentinel.clone());
                report.missing_filled += 1;
            }
        }
        if seen.insert(r.clone()) {
            out.push(r);
        } else {
            report.duplicates_removed += 1;
        }
    }
    report.outliers_flagged = flag_outliers(&out, policy.outlier_k);
    (out, report)
}

/// Median of integer values, doubled so that even-length medians stay exact.
fn doubled_median(sorted: &[i128]) -> i128 {
    let n = sorted.len();
    if n % 2 == 1 {
        2 * sorted[n / 2]
    } else {
        sorted[n / 2 - 1] + sorted[n / 2]
    }
}

fn flag_outliers(rows: &[RawTransaction], k: f64) -> Vec<OutlierFlag> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry(r.gl_account.as_str()).or_default().push(i);
    }
    let mut flagged = vec![false; rows.len()];
    for members in groups.values() {
        let mut xs: Vec<i128> = members.iter().map(|&i| rows[i].amount_lc.minor() as i128).collect();
        xs.sort_unstable();
        let med2 = doubled_median(&xs);
        // deviations on the doubled scale: |2x - 2med|
        let mut dev2: Vec<i128> = xs.iter().map(|x| (2 * x - med2).abs()).collect();
        dev2.sort_unstable();
        // 4 * MAD
        let mad4 = doubled_median(&dev2);
        for &i in members {
            let d2 = (2 * rows[i].amount_lc.minor() as i128 - med2).abs();
            // |x - med| > k * MAD  <=>  2 * d2 > k * mad4
            if 2.0 * d2 as f64 > k * mad4 as f64 {
                flagged[i] = true;
            }
        }
    }
    rows.iter()
        .zip(flagged)
        .filter(|(_, f)| *f)
        .map(|(r, _)| OutlierFlag { key: r.key(), field: Field::Wrbtr, value: r.amount_lc })
        .collect()
}

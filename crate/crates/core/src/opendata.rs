//! Public dataset catalog, aggregated CSV exports with small-count
//! suppression, and a scanner that checks exports for private values.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::casework::Casework;
use crate::dates::{in_window, month_key, DateRange};
use crate::error::{Error, Result};
use crate::health::HealthStore;
use crate::registry::{Gender, Registry, ResidencyStatus, ZoneId};

/// Counts below this are published as [`SUPPRESSED`].
pub const SUPPRESSION_THRESHOLD: u64 = 3;
pub const SUPPRESSED: &str = "<3";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetId {
    BarangayProfile,
    CrimeStatus,
    HealthStatus,
    ProgramsAdvisories,
}

impl DatasetId {
    pub const ALL: [DatasetId; 4] = [
        DatasetId::BarangayProfile,
        DatasetId::CrimeStatus,
        DatasetId::HealthStatus,
        DatasetId::ProgramsAdvisories,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::BarangayProfile => "barangay_profile",
            DatasetId::CrimeStatus => "crime_status",
            DatasetId::HealthStatus => "health_status",
            DatasetId::ProgramsAdvisories => "programs_advisories",
        }
    }

    pub fn parse(raw: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == raw)
            .ok_or_else(|| Error::not_found("dataset", raw))
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            DatasetId::BarangayProfile => &["zone_id", "resident_count", "migrant_count", "male_count", "female_count"],
            DatasetId::CrimeStatus => &["month", "zone_id", "offense_type", "count"],
            DatasetId::HealthStatus => &["month", "zone_id", "condition", "count"],
            DatasetId::ProgramsAdvisories => &["published_at", "title", "body"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetDescriptor {
    pub dataset_id: DatasetId,
    pub title: &'static str,
    pub description: &'static str,
    pub columns: &'static [&'static str],
    pub refresh: &'static str,
}

pub fn catalog() -> Vec<DatasetDescriptor> {
    DatasetId::ALL
        .into_iter()
        .map(|d| {
            let (title, description) = match d {
                DatasetId::BarangayProfile => (
                    "Barangay profile",
                    "Registered residents per zone by residency status and gender.",
                ),
                DatasetId::CrimeStatus => ("Crime status", "Blotter cases per month, zone and offense type."),
                DatasetId::HealthStatus => ("Health status", "Recorded health cases per month, zone and condition."),
                DatasetId::ProgramsAdvisories => (
                    "Programs and advisories",
                    "Government programs, medical missions and other public advisories.",
                ),
            };
            DatasetDescriptor {
                dataset_id: d,
                title,
                description,
                columns: d.columns(),
                refresh: "derived_on_demand",
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Advisory {
    pub advisory_id: String,
    pub title: String,
    pub body: String,
    pub published_at: DateTime<Utc>,
    pub published_by: String,
}

/// A count cell as published.
pub fn suppress(count: u64) -> String {
    if count > 0 && count < SUPPRESSION_THRESHOLD {
        SUPPRESSED.to_string()
    } else {
        count.to_string()
    }
}

/// Read-only view of the stores an export draws from.
pub struct Sources<'a> {
    pub registry: &'a Registry,
    pub casework: &'a Casework,
    pub health: &'a HealthStore,
    pub advisories: &'a [Advisory],
    pub zones: &'a BTreeSet<ZoneId>,
}

/// Builds the CSV for `dataset`. The profile is a current snapshot and
/// ignores `window`; the others keep records dated inside it.
pub fn export_csv(dataset: DatasetId, src: &Sources<'_>, window: Option<&DateRange>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(dataset.columns())?;
    match dataset {
        DatasetId::BarangayProfile => {
            let mut per_zone: BTreeMap<ZoneId, [u64; 4]> = src.zones.iter().map(|z| (*z, [0; 4])).collect();
            for r in src.registry.iter() {
                let row = per_zone.entry(r.zone_id).or_default();
                row[0] += 1;
                row[1] += u64::from(r.residency_status == ResidencyStatus::Migrant);
                row[2] += u64::from(r.gender == Gender::Male);
                row[3] += u64::from(r.gender == Gender::Female);
            }
            for (zone, counts) in per_zone {
                let mut rec = vec![zone.to_string()];
                rec.extend(counts.iter().map(|&c| suppress(c)));
                w.write_record(&rec)?;
            }
        }
        DatasetId::CrimeStatus => {
            let mut table: BTreeMap<(String, ZoneId, String), u64> = BTreeMap::new();
            for c in src.casework.cases().filter(|c| in_window(window, c.date_filed)) {
                *table
                    .entry((month_key(c.date_filed), c.zone_id, c.offense_type.clone()))
                    .or_default() += 1;
            }
            for ((month, zone, offense), n) in table {
                w.write_record([month, zone.to_string(), offense, suppress(n)])?;
            }
        }
        DatasetId::HealthStatus => {
            let mut table: BTreeMap<(String, ZoneId, String), u64> = BTreeMap::new();
            for c in src.health.cases() {
                let day = c.recorded_at.date_naive();
                if in_window(window, day) {
                    *table.entry((month_key(day), c.zone_id, c.condition.clone())).or_default() += 1;
                }
            }
            for ((month, zone, condition), n) in table {
                w.write_record([month, zone.to_string(), condition, suppress(n)])?;
            }
        }
        DatasetId::ProgramsAdvisories => {
            let mut list: Vec<&Advisory> = src
                .advisories
                .iter()
                .filter(|a| in_window(window, a.published_at.date_naive()))
                .collect();
            list.sort_by(|a, b| (a.published_at, &a.advisory_id).cmp(&(b.published_at, &b.advisory_id)));
            for a in list {
                w.write_record([a.published_at.to_rfc3339(), a.title.clone(), a.body.clone()])?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Storage(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivateField {
    FullName,
    MobileNumber,
    Address,
    ResidentId,
    CaseNumber,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// 0-based record index, header included.
    pub row: usize,
    pub column: usize,
    pub field: PrivateField,
    pub value: String,
}

/// Private values to look for in published cells.
#[derive(Debug, Clone, Default)]
pub struct PrivacyIndex {
    names: BTreeSet<String>,
    phones: BTreeSet<String>,
    addresses: BTreeSet<String>,
    resident_ids: BTreeSet<String>,
    case_numbers: BTreeSet<String>,
}

/// Addresses shorter than this are too generic to match reliably.
const MIN_ADDRESS_LEN: usize = 6;

impl PrivacyIndex {
    pub fn build(registry: &Registry, casework: &Casework) -> Self {
        let mut idx = PrivacyIndex::default();
        for r in registry.iter() {
            let (first, middle, last) = (r.first_name.trim(), r.middle_name.trim(), r.last_name.trim());
            let mut forms = vec![format!("{first} {last}"), format!("{last}, {first}"), format!("{last} {first}")];
            if !middle.is_empty() {
                forms.push(format!("{first} {middle} {last}"));
                forms.push(format!("{last}, {first} {middle}"));
                forms.push(format!("{last} {first} {middle}"));
            }
            idx.names.extend(forms.into_iter().map(|f| f.to_lowercase()));
            if let Some(p) = &r.mobile_number {
                idx.phones.insert(p.digits().to_string());
            }
            let addr = r.address.trim().to_lowercase();
            if addr.chars().count() >= MIN_ADDRESS_LEN {
                idx.addresses.insert(addr);
            }
            idx.resident_ids.insert(r.resident_id.as_str().to_string());
        }
        for c in casework.cases() {
            idx.case_numbers.insert(c.case_number.as_str().to_string());
        }
        idx
    }

    fn check_cell(&self, cell: &str) -> Option<(PrivateField, String)> {
        for run in cell.split(|c: char| !c.is_ascii_digit()).filter(|r| !r.is_empty()) {
            if self.resident_ids.contains(run) {
                return Some((PrivateField::ResidentId, run.to_string()));
            }
            if self.case_numbers.contains(run) {
                return Some((PrivateField::CaseNumber, run.to_string()));
            }
        }
        // Phones are matched on their subscriber part across all digits of
        // the cell, so local ("0917...") and spaced-out forms match too.
        let digits: String = cell.chars().filter(char::is_ascii_digit).collect();
        if let Some(p) = self.phones.iter().find(|p| digits.contains(&p[p.len().saturating_sub(10)..])) {
            return Some((PrivateField::MobileNumber, p.clone()));
        }
        let lower = cell.to_lowercase();
        let squeezed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
        if let Some(n) = self.names.iter().find(|n| squeezed.contains(n.as_str())) {
            return Some((PrivateField::FullName, n.clone()));
        }
        if let Some(a) = self.addresses.iter().find(|a| squeezed.contains(a.as_str())) {
            return Some((PrivateField::Address, a.clone()));
        }
        None
    }
}

/// Lists every cell of `csv_bytes` that carries a private value.
pub fn privacy_scan(csv_bytes: &[u8], index: &PrivacyIndex) -> Result<Vec<Violation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(csv_bytes);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (column, cell) in rec.iter().enumerate() {
            if let Some((field, value)) = index.check_cell(cell) {
                out.push(Violation {
                    row,
                    column,
                    field,
                    value,
                });
            }
        }
    }
    Ok(out)
}

/// Count cells that would reveal a group smaller than the threshold.
pub fn unsuppressed_small_counts(dataset: DatasetId, csv_bytes: &[u8]) -> Result<usize> {
    let count_cols: Vec<usize> = dataset
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.ends_with("count"))
        .map(|(i, _)| i)
        .collect();
    let mut rdr = csv::Reader::from_reader(csv_bytes);
    let mut bad = 0;
    for rec in rdr.records() {
        let rec = rec?;
        for &i in &count_cols {
            let cell = rec.get(i).unwrap_or("");
            if cell != SUPPRESSED && matches!(cell.parse::<u64>(), Ok(n) if n > 0 && n < SUPPRESSION_THRESHOLD) {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suppression_token() {
        assert_eq!(suppress(0), "0");
        assert_eq!(suppress(1), "<3");
        assert_eq!(suppress(2), "<3");
        assert_eq!(suppress(3), "3");
    }

    #[test]
    fn catalog_has_no_private_columns() {
        let cat = catalog();
        assert_eq!(cat.len(), 4);
        let private = ["name", "mobile", "phone", "address", "resident_id", "case_number"];
        for d in &cat {
            for c in d.columns {
                assert!(!private.iter().any(|p| c.contains(p)), "{c}");
            }
        }
        assert_eq!(DatasetId::parse("crime_status").unwrap(), DatasetId::CrimeStatus);
        assert_eq!(DatasetId::parse("residents").unwrap_err().code(), "NOT_FOUND");
    }

    #[test]
    fn empty_crime_export_is_header_only() {
        let (reg, cw, h) = (Registry::default(), Casework::default(), HealthStore::default());
        let zones = BTreeSet::new();
        let src = Sources {
            registry: &reg,
            casework: &cw,
            health: &h,
            advisories: &[],
            zones: &zones,
        };
        let out = export_csv(DatasetId::CrimeStatus, &src, None).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "month,zone_id,offense_type,count\n");
    }

    #[test]
    fn malformed_csv() {
        let idx = PrivacyIndex::default();
        assert_eq!(privacy_scan(b"a,b\n1\n", &idx).unwrap_err().code(), "MALFORMED_CSV");
    }
}

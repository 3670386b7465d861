//! Resident profiles, stable identification numbers and per-resident
//! transaction histories.

pub mod csv;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::dates::ensure_not_future;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResidentId(String);

impl ResidentId {
    pub fn from_seq(seq: u64) -> Self {
        ResidentId(format!("{seq:06}"))
    }

    /// Accepts the registry's zero-padded decimal form only.
    pub fn parse(raw: &str) -> Result<Self> {
        let raw = raw.trim();
        if raw.len() >= 6 && raw.bytes().all(|b| b.is_ascii_digit()) {
            Ok(ResidentId(raw.to_string()))
        } else {
            Err(Error::invalid("resident_id", format!("{raw:?} is not a registry id")))
        }
    }

    pub fn seq(&self) -> u64 {
        self.0.parse().unwrap_or(0)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ResidentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Mobile number in E.164 form, e.g. `+639073818003`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Phone(String);

impl Phone {
    pub fn parse(raw: &str) -> Result<Self> {
        let raw = raw.trim();
        let digits = raw.strip_prefix('+').unwrap_or("");
        let ok = (2..=15).contains(&digits.len())
            && digits.bytes().all(|b| b.is_ascii_digit())
            && !digits.starts_with('0');
        if ok {
            Ok(Phone(raw.to_string()))
        } else {
            Err(Error::invalid("mobile_number", format!("{raw:?} is not E.164")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn digits(&self) -> &str {
        &self.0[1..]
    }
}

impl TryFrom<String> for Phone {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Phone::parse(&s)
    }
}

impl From<Phone> for String {
    fn from(p: Phone) -> String {
        p.0
    }
}

impl fmt::Display for Phone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn label(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidencyStatus {
    Migrant,
    NonMigrant,
}

impl ResidencyStatus {
    pub fn label(self) -> &'static str {
        match self {
            ResidencyStatus::Migrant => "migrant",
            ResidencyStatus::NonMigrant => "non_migrant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneId(pub u32);

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A profile as submitted for registration, before an id is assigned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewResident {
    pub last_name: String,
    pub first_name: String,
    #[serde(default)]
    pub middle_name: String,
    pub birthdate: NaiveDate,
    pub gender: Gender,
    #[serde(default)]
    pub occupation: String,
    pub residency_status: ResidencyStatus,
    pub zone_id: ZoneId,
    #[serde(default)]
    pub address: String,
    #[serde(default)]
    pub mobile_number: Option<Phone>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resident {
    pub resident_id: ResidentId,
    pub last_name: String,
    pub first_name: String,
    pub middle_name: String,
    pub birthdate: NaiveDate,
    pub gender: Gender,
    pub occupation: String,
    pub residency_status: ResidencyStatus,
    pub zone_id: ZoneId,
    pub address: String,
    pub mobile_number: Option<Phone>,
    pub registered_at: DateTime<Utc>,
}

impl Resident {
    pub fn from_profile(id: ResidentId, p: NewResident, registered_at: DateTime<Utc>) -> Self {
        Resident {
            resident_id: id,
            last_name: p.last_name,
            first_name: p.first_name,
            middle_name: p.middle_name,
            birthdate: p.birthdate,
            gender: p.gender,
            occupation: p.occupation,
            residency_status: p.residency_status,
            zone_id: p.zone_id,
            address: p.address,
            mobile_number: p.mobile_number,
            registered_at,
        }
    }

    pub fn profile(&self) -> NewResident {
        NewResident {
            last_name: self.last_name.clone(),
            first_name: self.first_name.clone(),
            middle_name: self.middle_name.clone(),
            birthdate: self.birthdate,
            gender: self.gender,
            occupation: self.occupation.clone(),
            residency_status: self.residency_status,
            zone_id: self.zone_id,
            address: self.address.clone(),
            mobile_number: self.mobile_number.clone(),
        }
    }

    /// "First Middle Last", skipping an empty middle name.
    pub fn full_name(&self) -> String {
        [&self.first_name, &self.middle_name, &self.last_name]
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn sort_key(&self) -> (String, String, String, ResidentId) {
        (
            self.last_name.to_lowercase(),
            self.first_name.to_lowercase(),
            self.middle_name.to_lowercase(),
            self.resident_id.clone(),
        )
    }

    fn matches(&self, needle_lower: &str) -> bool {
        needle_lower.is_empty()
            || [&self.last_name, &self.first_name, &self.middle_name]
                .iter()
                .any(|n| n.to_lowercase().contains(needle_lower))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransactionKind {
    ClearanceIssued,
    ClearanceDenied,
    BlotterComplainant,
    BlotterRespondent,
    HealthCase,
    SmsSent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionEntry {
    pub resident_id: ResidentId,
    pub kind: TransactionKind,
    pub reference_id: String,
    pub occurred_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Profile {
    pub resident: Resident,
    pub transactions: Vec<TransactionEntry>,
}

/// Outcome of a registration; `possible_duplicate` flags an existing
/// resident with the same name and birthdate.
#[derive(Debug, Clone, Serialize)]
pub struct Registration {
    pub resident_id: ResidentId,
    pub possible_duplicate: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Page {
    pub offset: usize,
    pub limit: usize,
}

impl Default for Page {
    fn default() -> Self {
        Page {
            offset: 0,
            limit: usize::MAX,
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Registry {
    residents: BTreeMap<ResidentId, Resident>,
    histories: BTreeMap<ResidentId, Vec<TransactionEntry>>,
    next_seq: u64,
}

impl Registry {
    pub fn len(&self) -> usize {
        self.residents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residents.is_empty()
    }

    pub fn next_id(&self) -> ResidentId {
        ResidentId::from_seq(self.next_seq.max(1))
    }

    pub fn contains(&self, id: &ResidentId) -> bool {
        self.residents.contains_key(id)
    }

    pub fn get(&self, id: &ResidentId) -> Result<&Resident> {
        self.residents.get(id).ok_or_else(|| Error::not_found("resident", id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Resident> {
        self.residents.values()
    }

    pub fn history(&self, id: &ResidentId) -> Result<&[TransactionEntry]> {
        self.get(id)?;
        Ok(self.histories.get(id).map(Vec::as_slice).unwrap_or(&[]))
    }

    pub fn has_homonym(&self, p: &NewResident) -> bool {
        self.residents.values().any(|r| {
            r.last_name.eq_ignore_ascii_case(&p.last_name)
                && r.first_name.eq_ignore_ascii_case(&p.first_name)
                && r.middle_name.eq_ignore_ascii_case(&p.middle_name)
                && r.birthdate == p.birthdate
        })
    }

    /// Case-insensitive substring search over all name fields, ordered by
    /// (last, first, middle) case-insensitively.
    pub fn find(&self, query: &str, page: Page) -> Vec<Resident> {
        let needle = query.trim().to_lowercase();
        let mut hits: Vec<&Resident> = self.residents.values().filter(|r| r.matches(&needle)).collect();
        hits.sort_by_cached_key(|r| r.sort_key());
        hits.into_iter()
            .skip(page.offset)
            .take(page.limit)
            .cloned()
            .collect()
    }

    pub(crate) fn insert(&mut self, r: Resident) {
        self.next_seq = self.next_seq.max(r.resident_id.seq() + 1);
        self.histories.entry(r.resident_id.clone()).or_default();
        self.residents.insert(r.resident_id.clone(), r);
    }

    pub(crate) fn push_history(&mut self, entry: TransactionEntry) {
        self.histories
            .entry(entry.resident_id.clone())
            .or_default()
            .push(entry);
    }
}

/// Field-level checks applied to every profile before it is stored.
pub fn validate_profile(p: &NewResident, today: NaiveDate, zones: &BTreeSet<ZoneId>) -> Result<()> {
    for (field, value) in [("last_name", &p.last_name), ("first_name", &p.first_name)] {
        if value.trim().is_empty() {
            return Err(Error::invalid(field, "must not be empty"));
        }
    }
    ensure_not_future("birthdate", p.birthdate, today)?;
    if !zones.contains(&p.zone_id) {
        return Err(Error::ZoneUnknown(p.zone_id.0));
    }
    if let Some(phone) = &p.mobile_number {
        Phone::parse(phone.as_str())?;
    }
    Ok(())
}

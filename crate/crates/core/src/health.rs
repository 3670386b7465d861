//! Community and child health records.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::dates::{age_on, ensure_not_future, in_window, AgeBand, DateRange};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::registry::{Gender, Registry, ResidentId, ZoneId};

pub type CountTable = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewChild {
    pub last_name: String,
    pub first_name: String,
    #[serde(default)]
    pub middle_name: String,
    pub birthdate: NaiveDate,
    pub gender: Gender,
    #[serde(default)]
    pub guardian_resident_id: Option<ResidentId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildRecord {
    pub child_id: String,
    pub last_name: String,
    pub first_name: String,
    pub middle_name: String,
    pub birthdate: NaiveDate,
    pub gender: Gender,
    pub guardian_resident_id: Option<ResidentId>,
}

impl ChildRecord {
    pub fn from_new(child_id: String, c: NewChild) -> Self {
        ChildRecord {
            child_id,
            last_name: c.last_name,
            first_name: c.first_name,
            middle_name: c.middle_name,
            birthdate: c.birthdate,
            gender: c.gender,
            guardian_resident_id: c.guardian_resident_id,
        }
    }
}

pub fn validate_child(c: &NewChild, today: NaiveDate) -> Result<()> {
    if c.last_name.trim().is_empty() {
        return Err(Error::invalid("last_name", "must not be empty"));
    }
    if c.first_name.trim().is_empty() {
        return Err(Error::invalid("first_name", "must not be empty"));
    }
    ensure_not_future("birthdate", c.birthdate, today)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum Subject {
    Resident(ResidentId),
    Child(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewHealthCase {
    pub subject: Subject,
    pub condition: String,
    #[serde(default)]
    pub notes: String,
    pub location: GeoPoint,
    #[serde(default)]
    pub zone_id: Option<ZoneId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthCase {
    pub health_case_id: String,
    pub subject: Subject,
    pub condition: String,
    pub notes: String,
    pub location: GeoPoint,
    pub zone_id: ZoneId,
    pub recorded_at: DateTime<Utc>,
    pub recorded_by: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HealthGroupBy {
    Zone,
    Condition,
}

#[derive(Debug, Default, Clone)]
pub struct HealthStore {
    children: BTreeMap<String, ChildRecord>,
    cases: BTreeMap<String, HealthCase>,
    next_child: u64,
    next_case: u64,
}

fn seq_of(id: &str, prefix: &str) -> u64 {
    id.trim_start_matches(prefix).parse().unwrap_or(0)
}

impl HealthStore {
    pub fn child(&self, id: &str) -> Result<&ChildRecord> {
        self.children.get(id).ok_or_else(|| Error::not_found("child", id))
    }

    pub fn children(&self) -> impl Iterator<Item = &ChildRecord> {
        self.children.values()
    }

    pub fn case(&self, id: &str) -> Result<&HealthCase> {
        self.cases.get(id).ok_or_else(|| Error::not_found("health case", id))
    }

    pub fn cases(&self) -> impl Iterator<Item = &HealthCase> {
        self.cases.values()
    }

    pub fn next_child_id(&self) -> String {
        format!("CH-{:06}", self.next_child.max(1))
    }

    pub fn next_case_id(&self) -> String {
        format!("HC-{:06}", self.next_case.max(1))
    }

    pub(crate) fn insert_child(&mut self, c: ChildRecord) {
        self.next_child = self.next_child.max(seq_of(&c.child_id, "CH-") + 1);
        self.children.insert(c.child_id.clone(), c);
    }

    pub(crate) fn insert_case(&mut self, c: HealthCase) {
        self.next_case = self.next_case.max(seq_of(&c.health_case_id, "HC-") + 1);
        self.cases.insert(c.health_case_id.clone(), c);
    }

    /// Counts cases recorded inside `window` by zone or condition.
    pub fn summary(&self, window: Option<&DateRange>, group_by: HealthGroupBy) -> CountTable {
        let mut table = CountTable::new();
        for c in self.cases.values().filter(|c| in_window(window, c.recorded_at.date_naive())) {
            let key = match group_by {
                HealthGroupBy::Zone => c.zone_id.to_string(),
                HealthGroupBy::Condition => c.condition.clone(),
            };
            *table.entry(key).or_default() += 1;
        }
        table
    }

    /// Birthdate and gender of a case's subject, wherever it is recorded.
    pub fn subject_demographics(&self, subject: &Subject, registry: &Registry) -> Option<(NaiveDate, Gender)> {
        match subject {
            Subject::Resident(id) => registry.get(id).ok().map(|r| (r.birthdate, r.gender)),
            Subject::Child(id) => self.children.get(id).map(|c| (c.birthdate, c.gender)),
        }
    }
}

pub const EXPORT_HEADER: [&str; 5] = ["recorded_at", "zone_id", "condition", "age_band", "gender"];

/// Name-free case listing for open-data consumers.
pub fn export_csv(store: &HealthStore, registry: &Registry, window: Option<&DateRange>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EXPORT_HEADER)?;
    for c in store.cases().filter(|c| in_window(window, c.recorded_at.date_naive())) {
        let (band, gender) = match store.subject_demographics(&c.subject, registry) {
            Some((birth, g)) => (AgeBand::of(age_on(birth, c.recorded_at.date_naive())).label(), g.label()),
            None => ("", ""),
        };
        w.write_record([
            c.recorded_at.format("%Y-%m-%d").to_string().as_str(),
            &c.zone_id.to_string(),
            &c.condition,
            band,
            gender,
        ])?;
    }
    w.into_inner().map_err(|e| Error::Storage(e.to_string()))
}

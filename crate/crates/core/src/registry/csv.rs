//! Bulk resident import/export in RFC 4180 CSV.

use chrono::{DateTime, Utc};

use super::{Gender, NewResident, Phone, ResidencyStatus, Resident, ResidentId, ZoneId};
use crate::dates::parse_date;
use crate::error::{Error, Result};

pub const HEADER: [&str; 12] = [
    "resident_id",
    "last_name",
    "first_name",
    "middle_name",
    "birthdate",
    "gender",
    "occupation",
    "residency_status",
    "zone_id",
    "address",
    "mobile_number",
    "registered_at",
];

pub fn export<'a>(residents: impl IntoIterator<Item = &'a Resident>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in residents {
        w.write_record([
            r.resident_id.as_str(),
            &r.last_name,
            &r.first_name,
            &r.middle_name,
            &r.birthdate.format("%Y-%m-%d").to_string(),
            r.gender.label(),
            &r.occupation,
            r.residency_status.label(),
            &r.zone_id.0.to_string(),
            &r.address,
            r.mobile_number.as_ref().map(Phone::as_str).unwrap_or(""),
            &r.registered_at.to_rfc3339(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Storage(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct ImportedResident {
    /// Kept when present so exported registries re-import under the same ids.
    pub resident_id: Option<ResidentId>,
    pub profile: NewResident,
    pub registered_at: Option<DateTime<Utc>>,
}

pub fn import(bytes: &[u8]) -> Result<Vec<ImportedResident>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MalformedCsv(format!("missing column {name}")))
    };
    let idx: Vec<usize> = HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| rec.get(idx[i]).unwrap_or("").trim();
        let row = || format!("row {}", line + 2);
        let gender = match get(5).to_lowercase().as_str() {
            "male" | "m" => Gender::Male,
            "female" | "f" => Gender::Female,
            other => return Err(Error::invalid("gender", format!("{}: {other:?}", row()))),
        };
        let residency_status = match get(7).to_lowercase().as_str() {
            "migrant" => ResidencyStatus::Migrant,
            "non_migrant" | "non-migrant" => ResidencyStatus::NonMigrant,
            other => return Err(Error::invalid("residency_status", format!("{}: {other:?}", row()))),
        };
        let zone_id = get(8)
            .parse::<u32>()
            .map(ZoneId)
            .map_err(|_| Error::invalid("zone_id", format!("{}: {:?}", row(), get(8))))?;
        let mobile_number = match get(10) {
            "" => None,
            raw => Some(Phone::parse(raw)?),
        };
        let resident_id = match get(0) {
            "" => None,
            raw => Some(ResidentId::parse(raw)?),
        };
        let registered_at = match get(11) {
            "" => None,
            raw => Some(
                DateTime::parse_from_rfc3339(raw)
                    .map_err(|e| Error::invalid("registered_at", format!("{}: {e}", row())))?
                    .with_timezone(&Utc),
            ),
        };
        out.push(ImportedResident {
            resident_id,
            profile: NewResident {
                last_name: get(1).to_string(),
                first_name: get(2).to_string(),
                middle_name: get(3).to_string(),
                birthdate: parse_date("birthdate", get(4))?,
                gender,
                occupation: get(6).to_string(),
                residency_status,
                zone_id,
                address: get(9).to_string(),
                mobile_number,
            },
            registered_at,
        });
    }
    Ok(out)
}

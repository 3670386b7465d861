//! Blotter import/export CSV. Id lists are semicolon-separated.

use chrono::NaiveDate;

use super::{normalize_label, BlotterCase, CaseNumber, CaseStatus};
use crate::dates::parse_date;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::registry::{ResidentId, ZoneId};

pub const HEADER: [&str; 9] = [
    "case_number",
    "date_filed",
    "complainant_ids",
    "respondent_ids",
    "offense_type",
    "status",
    "lat",
    "lon",
    "zone_id",
];

fn join_ids(ids: &[ResidentId]) -> String {
    ids.iter().map(ResidentId::as_str).collect::<Vec<_>>().join(";")
}

pub fn export<'a>(cases: impl IntoIterator<Item = &'a BlotterCase>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for c in cases {
        w.write_record([
            c.case_number.as_str(),
            &c.date_filed.format("%Y-%m-%d").to_string(),
            &join_ids(&c.complainant_ids),
            &join_ids(&c.respondent_ids),
            &c.offense_type,
            c.status.label(),
            &c.location.lat.to_string(),
            &c.location.lon.to_string(),
            &c.zone_id.0.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Storage(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedCase {
    pub case_number: CaseNumber,
    pub date_filed: NaiveDate,
    pub complainant_ids: Vec<ResidentId>,
    pub respondent_ids: Vec<ResidentId>,
    pub offense_type: String,
    pub status: CaseStatus,
    pub location: GeoPoint,
    pub zone_id: ZoneId,
}

fn split_ids(field: &str, raw: &str) -> Result<Vec<ResidentId>> {
    let ids: Vec<ResidentId> = raw
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(ResidentId::parse)
        .collect::<Result<_>>()?;
    if ids.is_empty() {
        return Err(Error::invalid(field, "at least one resident is required"));
    }
    Ok(ids)
}

pub fn import(bytes: &[u8]) -> Result<Vec<ImportedCase>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).ne(HEADER) {
        return Err(Error::MalformedCsv(format!("expected header {}", HEADER.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("").trim();
        let num = |i: usize, name: &str| -> Result<f64> {
            f(i).parse::<f64>()
                .map_err(|_| Error::invalid(name, format!("{:?} is not a number", f(i))))
        };
        let location = GeoPoint::new(num(6, "lat")?, num(7, "lon")?);
        location.validate()?;
        out.push(ImportedCase {
            case_number: CaseNumber::parse(f(0))?,
            date_filed: parse_date("date_filed", f(1))?,
            complainant_ids: split_ids("complainant_ids", f(2))?,
            respondent_ids: split_ids("respondent_ids", f(3))?,
            offense_type: normalize_label(f(4)),
            status: CaseStatus::parse(f(5))?,
            location,
            zone_id: ZoneId(
                f(8).parse()
                    .map_err(|_| Error::invalid("zone_id", format!("{:?}", f(8))))?,
            ),
        });
    }
    Ok(out)
}

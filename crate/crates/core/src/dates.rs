//! Calendar helpers: date parsing, inclusive windows and age bands.

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted textual date layouts. ISO first; the long forms match how
/// legacy spreadsheets record birthdates ("April 3 2013").
const DATE_FORMATS: &[&str] = &["%Y-%m-%d", "%B %d %Y", "%B %d, %Y", "%b %d %Y", "%m/%d/%Y"];

pub fn parse_date(field: &str, raw: &str) -> Result<NaiveDate> {
    let raw = raw.trim();
    DATE_FORMATS
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(raw, fmt).ok())
        .ok_or_else(|| Error::invalid(field, format!("unparseable date {raw:?}")))
}

pub fn ensure_not_future(field: &str, date: NaiveDate, today: NaiveDate) -> Result<()> {
    if date > today {
        return Err(Error::invalid(field, format!("{date} is in the future")));
    }
    Ok(())
}

/// Inclusive calendar window `[from, to]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl DateRange {
    pub fn new(from: NaiveDate, to: NaiveDate) -> Result<Self> {
        if from > to {
            return Err(Error::invalid("window", format!("{from} is after {to}")));
        }
        Ok(Self { from, to })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.from <= date && date <= self.to
    }

    pub fn contains_ts(&self, ts: DateTime<Utc>) -> bool {
        self.contains(ts.date_naive())
    }
}

/// `None` is the unbounded window.
pub fn in_window(window: Option<&DateRange>, date: NaiveDate) -> bool {
    window.is_none_or(|w| w.contains(date))
}

/// Whole years elapsed between `birthdate` and `on`.
pub fn age_on(birthdate: NaiveDate, on: NaiveDate) -> u32 {
    let mut years = on.year() - birthdate.year();
    if (on.month(), on.day()) < (birthdate.month(), birthdate.day()) {
        years -= 1;
    }
    years.max(0) as u32
}

pub fn month_key(date: NaiveDate) -> String {
    format!("{:04}-{:02}", date.year(), date.month())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeBand {
    #[serde(rename = "<18")]
    Under18,
    #[serde(rename = "18-25")]
    From18To25,
    #[serde(rename = "26-40")]
    From26To40,
    #[serde(rename = "41-60")]
    From41To60,
    #[serde(rename = ">60")]
    Over60,
}

impl AgeBand {
    pub const ALL: [AgeBand; 5] = [
        AgeBand::Under18,
        AgeBand::From18To25,
        AgeBand::From26To40,
        AgeBand::From41To60,
        AgeBand::Over60,
    ];

    pub fn of(age: u32) -> Self {
        match age {
            0..=17 => AgeBand::Under18,
            18..=25 => AgeBand::From18To25,
            26..=40 => AgeBand::From26To40,
            41..=60 => AgeBand::From41To60,
            _ => AgeBand::Over60,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeBand::Under18 => "<18",
            AgeBand::From18To25 => "18-25",
            AgeBand::From26To40 => "26-40",
            AgeBand::From41To60 => "41-60",
            AgeBand::Over60 => ">60",
        }
    }
}

//! Blotter cases and clearance/certificate issuance.
//!
//! A clearance is denied while the resident is a respondent in any open
//! case, unless a secretary overrides the check.

pub mod csv;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::access::{Officer, Role};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::registry::{Gender, ResidencyStatus, Resident, ResidentId, ZoneId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CaseNumber(String);

impl CaseNumber {
    pub const MIN: u32 = 100_000;
    pub const MAX: u32 = 999_999;

    pub fn parse(raw: &str) -> Result<Self> {
        let raw = raw.trim();
        if raw.len() == 6 && raw.bytes().all(|b| b.is_ascii_digit()) && !raw.starts_with('0') {
            Ok(CaseNumber(raw.to_string()))
        } else {
            Err(Error::invalid("case_number", format!("{raw:?} is not a 6-digit case number")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Draws uniformly from 100000..=999999, retrying on collision.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, taken: impl Fn(&CaseNumber) -> bool) -> Result<Self> {
        // 900k slots; a barangay blotter never gets close to exhausting them
        for _ in 0..10_000 {
            let n = CaseNumber(rng.random_range(Self::MIN..=Self::MAX).to_string());
            if !taken(&n) {
                return Ok(n);
            }
        }
        Err(Error::Conflict("case number space exhausted".into()))
    }
}

impl TryFrom<String> for CaseNumber {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        CaseNumber::parse(&s)
    }
}

impl From<CaseNumber> for String {
    fn from(c: CaseNumber) -> String {
        c.0
    }
}

impl fmt::Display for CaseNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Open,
    Settled,
    Referred,
    Dismissed,
}

impl CaseStatus {
    pub fn label(self) -> &'static str {
        match self {
            CaseStatus::Open => "open",
            CaseStatus::Settled => "settled",
            CaseStatus::Referred => "referred",
            CaseStatus::Dismissed => "dismissed",
        }
    }

    pub fn parse(raw: &str) -> Result<Self> {
        match raw.trim() {
            "open" => Ok(CaseStatus::Open),
            "settled" => Ok(CaseStatus::Settled),
            "referred" => Ok(CaseStatus::Referred),
            "dismissed" => Ok(CaseStatus::Dismissed),
            other => Err(Error::invalid("status", format!("unknown status {other:?}"))),
        }
    }

    /// Only `open` may move, and only to a closed state.
    pub fn check_transition(self, to: CaseStatus) -> Result<()> {
        if self == CaseStatus::Open && to != CaseStatus::Open {
            Ok(())
        } else {
            Err(Error::IllegalTransition {
                from: self.label().into(),
                to: to.label().into(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    #[default]
    Unknown,
}

impl Answer {
    pub fn label(self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Unknown => "unknown",
        }
    }
}

/// Yes/no/unknown risk factors recorded per respondent at filing time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorAnswers {
    pub employment: Answer,
    pub alcohol_problems: Answer,
    pub family_problems: Answer,
    pub status: Answer,
    pub drug_problems: Answer,
    pub gambling: Answer,
    pub drug_addiction: Answer,
    pub mental_health_problems: Answer,
    pub financial_problems: Answer,
    pub school_problem: Answer,
}

impl FactorAnswers {
    pub const NAMES: [&'static str; 10] = [
        "employment",
        "alcohol_problems",
        "family_problems",
        "status",
        "drug_problems",
        "gambling",
        "drug_addiction",
        "mental_health_problems",
        "financial_problems",
        "school_problem",
    ];

    pub fn values(&self) -> [Answer; 10] {
        [
            self.employment,
            self.alcohol_problems,
            self.family_problems,
            self.status,
            self.drug_problems,
            self.gambling,
            self.drug_addiction,
            self.mental_health_problems,
            self.financial_problems,
            self.school_problem,
        ]
    }

    pub fn from_values(v: [Answer; 10]) -> Self {
        FactorAnswers {
            employment: v[0],
            alcohol_problems: v[1],
            family_problems: v[2],
            status: v[3],
            drug_problems: v[4],
            gambling: v[5],
            drug_addiction: v[6],
            mental_health_problems: v[7],
            financial_problems: v[8],
            school_problem: v[9],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OffenderFactorVector {
    #[serde(flatten)]
    pub answers: FactorAnswers,
    pub age: u32,
    pub gender: Gender,
    pub residency_status: ResidencyStatus,
}

impl OffenderFactorVector {
    pub const MAX_AGE: u32 = 130;

    pub fn for_resident(r: &Resident, answers: FactorAnswers, on: NaiveDate) -> Self {
        OffenderFactorVector {
            answers,
            age: crate::dates::age_on(r.birthdate, on),
            gender: r.gender,
            residency_status: r.residency_status,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.age > Self::MAX_AGE {
            return Err(Error::invalid("age", format!("{} exceeds {}", self.age, Self::MAX_AGE)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditNote {
    pub at: DateTime<Utc>,
    pub officer: String,
    pub from: CaseStatus,
    pub to: CaseStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlotterCase {
    pub case_number: CaseNumber,
    pub date_filed: NaiveDate,
    pub complainant_ids: Vec<ResidentId>,
    pub respondent_ids: Vec<ResidentId>,
    pub offense_type: String,
    pub narrative: String,
    pub location: GeoPoint,
    pub zone_id: ZoneId,
    pub status: CaseStatus,
    pub offender_factors: BTreeMap<ResidentId, OffenderFactorVector>,
    #[serde(default)]
    pub audit: Vec<AuditNote>,
}

impl BlotterCase {
    pub fn involves_as_respondent(&self, id: &ResidentId) -> bool {
        self.respondent_ids.contains(id)
    }
}

/// Request to file a new blotter entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewCase {
    pub complainant_ids: Vec<ResidentId>,
    pub respondent_ids: Vec<ResidentId>,
    pub offense_type: String,
    #[serde(default)]
    pub narrative: String,
    pub location: GeoPoint,
    /// Derived from `location` when absent.
    #[serde(default)]
    pub zone_id: Option<ZoneId>,
    pub date_filed: NaiveDate,
    /// Answers per respondent; respondents without an entry get all-unknown.
    #[serde(default)]
    pub factors: BTreeMap<ResidentId, FactorAnswers>,
}

pub fn normalize_label(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Clearance,
    Certification,
}

impl CertificateKind {
    pub fn title(self) -> &'static str {
        match self {
            CertificateKind::Clearance => "BARANGAY CLEARANCE",
            CertificateKind::Certification => "BARANGAY CERTIFICATION",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Issued,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub certificate_id: String,
    pub resident_id: ResidentId,
    pub kind: CertificateKind,
    pub purpose: String,
    pub issued_at: DateTime<Utc>,
    pub outcome: Outcome,
    pub denial_reason: Option<String>,
    pub override_by: Option<String>,
    /// Open cases the decision was made against.
    #[serde(default)]
    pub open_cases: Vec<CaseNumber>,
}

/// Outcome of the open-case check, before the certificate is numbered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClearanceDecision {
    pub outcome: Outcome,
    pub denial_reason: Option<String>,
    pub override_by: Option<String>,
}

/// Decides a clearance request against the resident's open respondent cases.
pub fn decide_clearance(open_cases: &[CaseNumber], officer: &Officer, override_check: bool) -> Result<ClearanceDecision> {
    if override_check && officer.role != Role::Secretary {
        return Err(Error::OverrideForbidden);
    }
    if open_cases.is_empty() {
        return Ok(ClearanceDecision {
            outcome: Outcome::Issued,
            denial_reason: None,
            override_by: None,
        });
    }
    if override_check {
        return Ok(ClearanceDecision {
            outcome: Outcome::Issued,
            denial_reason: None,
            override_by: Some(officer.username.clone()),
        });
    }
    let list = open_cases.iter().map(CaseNumber::as_str).collect::<Vec<_>>().join(", ");
    Ok(ClearanceDecision {
        outcome: Outcome::Denied,
        denial_reason: Some(format!("respondent in open case(s): {list}")),
        override_by: None,
    })
}

#[derive(Debug, Default, Clone)]
pub struct Casework {
    cases: BTreeMap<CaseNumber, BlotterCase>,
    certificates: BTreeMap<String, Certificate>,
    certificates_by_resident: BTreeMap<ResidentId, Vec<String>>,
    next_certificate: u64,
}

impl Casework {
    pub fn case(&self, n: &CaseNumber) -> Result<&BlotterCase> {
        self.cases.get(n).ok_or_else(|| Error::not_found("case", n))
    }

    pub fn contains_case(&self, n: &str) -> bool {
        CaseNumber::parse(n).is_ok_and(|n| self.cases.contains_key(&n))
    }

    pub fn cases(&self) -> impl Iterator<Item = &BlotterCase> {
        self.cases.values()
    }

    pub fn case_count(&self) -> usize {
        self.cases.len()
    }

    /// Open cases naming `id` as respondent, in case-number order.
    pub fn open_cases_against(&self, id: &ResidentId) -> Vec<CaseNumber> {
        self.cases
            .values()
            .filter(|c| c.status == CaseStatus::Open && c.involves_as_respondent(id))
            .map(|c| c.case_number.clone())
            .collect()
    }

    pub fn certificate(&self, id: &str) -> Result<&Certificate> {
        self.certificates.get(id).ok_or_else(|| Error::not_found("certificate", id))
    }

    pub fn certificates(&self) -> impl Iterator<Item = &Certificate> {
        self.certificates.values()
    }

    pub fn history(&self, id: &ResidentId) -> Vec<Certificate> {
        self.certificates_by_resident
            .get(id)
            .into_iter()
            .flatten()
            .filter_map(|c| self.certificates.get(c).cloned())
            .collect()
    }

    pub fn next_certificate_id(&self) -> String {
        format!("CERT-{:06}", self.next_certificate.max(1))
    }

    pub fn taken_numbers(&self) -> BTreeSet<&CaseNumber> {
        self.cases.keys().collect()
    }

    pub(crate) fn insert_case(&mut self, c: BlotterCase) {
        self.cases.insert(c.case_number.clone(), c);
    }

    pub(crate) fn set_status(&mut self, n: &CaseNumber, note: AuditNote) {
        if let Some(c) = self.cases.get_mut(n) {
            c.status = note.to;
            c.audit.push(note);
        }
    }

    pub(crate) fn insert_certificate(&mut self, cert: Certificate) {
        let seq: u64 = cert
            .certificate_id
            .trim_start_matches("CERT-")
            .parse()
            .unwrap_or(0);
        self.next_certificate = self.next_certificate.max(seq + 1);
        self.certificates_by_resident
            .entry(cert.resident_id.clone())
            .or_default()
            .push(cert.certificate_id.clone());
        self.certificates.insert(cert.certificate_id.clone(), cert);
    }
}

/// Plain-text printable certificate. Output depends only on its inputs.
pub fn render_certificate(cert: &Certificate, resident: &Resident, barangay_name: &str) -> Result<String> {
    if cert.outcome != Outcome::Issued {
        return Err(Error::NotIssued(cert.certificate_id.clone()));
    }
    let rule = "=".repeat(60);
    let mut out = String::new();
    out.push_str(&format!("{rule}\n"));
    out.push_str(&format!("{:^60}\n", "Republic of the Philippines"));
    out.push_str(&format!("{:^60}\n", barangay_name.to_uppercase()));
    out.push_str(&format!("{:^60}\n", cert.kind.title()));
    out.push_str(&format!("{rule}\n\n"));
    out.push_str(&format!("Certificate No.: {}\n", cert.certificate_id));
    out.push_str(&format!("Date issued:     {}\n\n", cert.issued_at.format("%B %d, %Y")));
    out.push_str("TO WHOM IT MAY CONCERN:\n\n");
    out.push_str(&format!(
        "This is to certify that {} (resident no. {}), of legal record in\n{}, Zone {}, is a bona fide resident of this barangay.\n\n",
        resident.full_name().to_uppercase(),
        resident.resident_id,
        barangay_name,
        resident.zone_id,
    ));
    out.push_str(&format!("Purpose: {}\n", cert.purpose));
    if let Some(by) = &cert.override_by {
        out.push_str(&format!("Issued under override by: {by}\n"));
    }
    out.push_str(&format!("\n{rule}\n"));
    Ok(out)
}

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::dataset::{encode_offender, offender_schema, Dataset, FeatureSpec, OffenderEncoding, Row};
use super::naive_bayes::train_naive_bayes;
use crate::casework::{BlotterCase, FactorAnswers, OffenderFactorVector};
use crate::dates::{age_on, in_window, month_key, AgeBand, DateRange};
use crate::error::{Error, Result};
use crate::health::CountTable;
use crate::registry::{Registry, ResidentId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartGroupBy {
    OffenseType,
    Zone,
    Month,
    ResidencyStatus,
}

/// Blotter counts in `window`. Residency grouping counts (case, respondent)
/// pairs because one case may name respondents of both kinds; the other
/// groupings count cases.
pub fn crime_chart<'a>(
    cases: impl IntoIterator<Item = &'a BlotterCase>,
    registry: &Registry,
    window: Option<&DateRange>,
    group_by: ChartGroupBy,
) -> CountTable {
    let mut table = CountTable::new();
    for c in cases.into_iter().filter(|c| in_window(window, c.date_filed)) {
        match group_by {
            ChartGroupBy::OffenseType => *table.entry(c.offense_type.clone()).or_default() += 1,
            ChartGroupBy::Zone => *table.entry(c.zone_id.to_string()).or_default() += 1,
            ChartGroupBy::Month => *table.entry(month_key(c.date_filed)).or_default() += 1,
            ChartGroupBy::ResidencyStatus => {
                for r in &c.respondent_ids {
                    let status = c
                        .offender_factors
                        .get(r)
                        .map(|f| f.residency_status)
                        .or_else(|| registry.get(r).ok().map(|p| p.residency_status));
                    if let Some(s) = status {
                        *table.entry(s.label().to_string()).or_default() += 1;
                    }
                }
            }
        }
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodTask {
    Reoffend,
    OffendByResidency,
}

pub const YES_NO_CLASSES: [&str; 2] = ["no", "yes"];

fn yes_no() -> Vec<String> {
    YES_NO_CLASSES.iter().map(|s| s.to_string()).collect()
}

/// One record per (case, respondent). The label is `yes` when the same
/// respondent is named again in a later case (ordered by filing date, then
/// case number).
pub fn reoffend_dataset<'a>(cases: impl IntoIterator<Item = &'a BlotterCase>, registry: &Registry) -> Result<Dataset> {
    let mut ordered: Vec<&BlotterCase> = cases.into_iter().collect();
    ordered.sort_by(|a, b| (a.date_filed, &a.case_number).cmp(&(b.date_filed, &b.case_number)));

    let mut last_seen: BTreeMap<&ResidentId, usize> = BTreeMap::new();
    for (i, c) in ordered.iter().enumerate() {
        for r in &c.respondent_ids {
            last_seen.insert(r, i);
        }
    }
    let enc = OffenderEncoding {
        month: true,
        without_residency: false,
    };
    let mut rows = Vec::new();
    for (i, c) in ordered.iter().enumerate() {
        for r in &c.respondent_ids {
            let factors = match c.offender_factors.get(r) {
                Some(f) => *f,
                None => match registry.get(r) {
                    Ok(p) => OffenderFactorVector::for_resident(p, FactorAnswers::default(), c.date_filed),
                    Err(_) => continue,
                },
            };
            let again = last_seen.get(r).is_some_and(|&last| last > i);
            rows.push(Row {
                features: encode_offender(&factors, Some(c.date_filed.month()), enc),
                label: usize::from(again),
            });
        }
    }
    Dataset::new(offender_schema(enc), yes_no(), rows)
}

/// One record per registered resident: residency, gender and age band,
/// labelled `yes` when the resident is a respondent in any case.
pub fn offend_by_residency_dataset<'a>(
    cases: impl IntoIterator<Item = &'a BlotterCase>,
    registry: &Registry,
    today: NaiveDate,
) -> Result<Dataset> {
    let offenders: BTreeSet<&ResidentId> = cases.into_iter().flat_map(|c| c.respondent_ids.iter()).collect();
    let full = offender_schema(OffenderEncoding::default());
    let schema: Vec<FeatureSpec> = full.into_iter().take(3).collect();
    let rows = registry
        .iter()
        .map(|r| {
            let band = AgeBand::of(age_on(r.birthdate, today));
            Row {
                features: vec![
                    Some(usize::from(r.residency_status == crate::registry::ResidencyStatus::NonMigrant)),
                    Some(usize::from(r.gender == crate::registry::Gender::Female)),
                    AgeBand::ALL.iter().position(|b| *b == band),
                ],
                label: usize::from(offenders.contains(&r.resident_id)),
            }
        })
        .collect();
    Dataset::new(schema, yes_no(), rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLikelihood {
    pub feature: String,
    pub value: String,
    /// Training records carrying this value.
    pub support: u64,
    /// Smoothed posterior per class given only this feature value.
    pub posterior: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodReport {
    pub task: LikelihoodTask,
    pub records: usize,
    pub class_counts: BTreeMap<String, u64>,
    pub groups: Vec<GroupLikelihood>,
}

/// Trains Naive Bayes on `data` and reports, for every value of each
/// feature in `group_features`, the posterior given that value alone.
pub fn likelihood_report_for(
    task: LikelihoodTask,
    data: &Dataset,
    group_features: &[usize],
    alpha: f64,
) -> Result<LikelihoodReport> {
    let present = data.classes_present();
    if present < 2 {
        return Err(Error::InsufficientClasses(present));
    }
    let model = train_naive_bayes(data, alpha)?;
    let mut groups = Vec::new();
    for &f in group_features {
        let spec = &data.schema[f];
        for (v, value) in spec.values.iter().enumerate() {
            let mut x = vec![None; data.schema.len()];
            x[f] = Some(v);
            let p = model.posterior::<f64>(&x)?;
            groups.push(GroupLikelihood {
                feature: spec.name.clone(),
                value: value.clone(),
                support: data.rows.iter().filter(|r| r.features[f] == Some(v)).count() as u64,
                posterior: data.classes.iter().cloned().zip(p).collect(),
            });
        }
    }
    Ok(LikelihoodReport {
        task,
        records: data.len(),
        class_counts: data.classes.iter().cloned().zip(data.class_counts()).collect(),
        groups,
    })
}

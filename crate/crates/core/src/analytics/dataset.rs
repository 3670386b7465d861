//! Categorical datasets and the offender-factor encoding.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::casework::{Answer, FactorAnswers, OffenderFactorVector};
use crate::dates::AgeBand;
use crate::error::{Error, Result};
use crate::registry::{Gender, ResidencyStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub values: Vec<String>,
}

impl FeatureSpec {
    pub fn new(name: &str, values: &[&str]) -> Self {
        FeatureSpec {
            name: name.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

/// One encoded record: a value index per feature (`None` = unknown) and a
/// class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub features: Vec<Option<usize>>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Vec<FeatureSpec>,
    pub classes: Vec<String>,
    pub rows: Vec<Row>,
}

impl Dataset {
    pub fn new(schema: Vec<FeatureSpec>, classes: Vec<String>, rows: Vec<Row>) -> Result<Self> {
        let ds = Dataset { schema, classes, rows };
        for row in &ds.rows {
            if row.label >= ds.classes.len() {
                return Err(Error::UnknownLabel(format!("class index {}", row.label)));
            }
            ds.check_features(&row.features)?;
        }
        Ok(ds)
    }

    /// Encodes string-valued records; labels must come from `classes`.
    pub fn from_labeled<S: AsRef<str>>(
        schema: Vec<FeatureSpec>,
        classes: Vec<String>,
        records: &[(Vec<Option<S>>, S)],
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(records.len());
        for (values, label) in records {
            let label = label.as_ref();
            let label = classes
                .iter()
                .position(|c| c == label)
                .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
            rows.push(Row {
                features: encode_values(&schema, values)?,
                label,
            });
        }
        Dataset::new(schema, classes, rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn check_features(&self, x: &[Option<usize>]) -> Result<()> {
        if x.len() != self.schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} features, got {}",
                self.schema.len(),
                x.len()
            )));
        }
        for (spec, v) in self.schema.iter().zip(x) {
            if let Some(v) = v {
                if *v >= spec.values.len() {
                    return Err(Error::SchemaMismatch(format!("value index {v} out of range for {}", spec.name)));
                }
            }
        }
        Ok(())
    }

    pub fn encode<S: AsRef<str>>(&self, values: &[Option<S>]) -> Result<Vec<Option<usize>>> {
        encode_values(&self.schema, values)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            classes: self.classes.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn class_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.classes.len()];
        for r in &self.rows {
            counts[r.label] += 1;
        }
        counts
    }

    pub fn classes_present(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }

    /// The same rows repeated `times` times.
    pub fn replicated(&self, times: usize) -> Dataset {
        let mut d = self.clone();
        d.rows = (0..times).flat_map(|_| self.rows.iter().cloned()).collect();
        d
    }
}

fn encode_values<S: AsRef<str>>(schema: &[FeatureSpec], values: &[Option<S>]) -> Result<Vec<Option<usize>>> {
    if values.len() != schema.len() {
        return Err(Error::SchemaMismatch(format!(
            "expected {} features, got {}",
            schema.len(),
            values.len()
        )));
    }
    schema
        .iter()
        .zip(values)
        .map(|(spec, v)| match v.as_ref().map(AsRef::as_ref) {
            None | Some("unknown") | Some("") => Ok(None),
            Some(v) => spec
                .index_of(v)
                .map(Some)
                .ok_or_else(|| Error::SchemaMismatch(format!("{:?} is not a value of {}", v, spec.name))),
        })
        .collect()
}

/// Encodes a name-to-value map against `schema`; absent names are unknown.
pub fn encode_named(schema: &[FeatureSpec], values: &BTreeMap<String, String>) -> Result<Vec<Option<usize>>> {
    if let Some(k) = values.keys().find(|k| !schema.iter().any(|s| &s.name == *k)) {
        return Err(Error::SchemaMismatch(format!("unknown feature {k:?}")));
    }
    let ordered: Vec<Option<&str>> = schema.iter().map(|s| values.get(&s.name).map(String::as_str)).collect();
    encode_values(schema, &ordered)
}

const YES_NO: [&str; 2] = ["yes", "no"];

/// Which optional columns an offender encoding carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OffenderEncoding {
    /// Month of filing, `01`..`12`.
    pub month: bool,
    /// Drop residency when it is the prediction target.
    pub without_residency: bool,
}

pub fn offender_schema(enc: OffenderEncoding) -> Vec<FeatureSpec> {
    let mut schema = Vec::new();
    if !enc.without_residency {
        schema.push(FeatureSpec::new("residency_status", &["migrant", "non_migrant"]));
    }
    schema.push(FeatureSpec::new("gender", &["male", "female"]));
    let bands: Vec<&str> = AgeBand::ALL.iter().map(|b| b.label()).collect();
    schema.push(FeatureSpec::new("age_band", &bands));
    for name in FactorAnswers::NAMES {
        schema.push(FeatureSpec::new(name, &YES_NO));
    }
    if enc.month {
        let months: Vec<String> = (1..=12).map(|m| format!("{m:02}")).collect();
        let refs: Vec<&str> = months.iter().map(String::as_str).collect();
        schema.push(FeatureSpec::new("month", &refs));
    }
    schema
}

fn answer_index(a: Answer) -> Option<usize> {
    match a {
        Answer::Yes => Some(0),
        Answer::No => Some(1),
        Answer::Unknown => None,
    }
}

pub fn encode_offender(v: &OffenderFactorVector, month: Option<u32>, enc: OffenderEncoding) -> Vec<Option<usize>> {
    let mut out = Vec::new();
    if !enc.without_residency {
        out.push(Some(match v.residency_status {
            ResidencyStatus::Migrant => 0,
            ResidencyStatus::NonMigrant => 1,
        }));
    }
    out.push(Some(match v.gender {
        Gender::Male => 0,
        Gender::Female => 1,
    }));
    let band = AgeBand::of(v.age);
    out.push(AgeBand::ALL.iter().position(|b| *b == band));
    out.extend(v.answers.values().into_iter().map(answer_index));
    if enc.month {
        out.push(month.filter(|m| (1..=12).contains(m)).map(|m| m as usize - 1));
    }
    out
}

/// Offender records with a label column, as exchanged in CSV.
///
/// Columns: `residency_status,gender,age,<ten yes/no/unknown factors>,label`.
/// The class set is the sorted set of distinct labels.
pub fn import_offender_csv(bytes: &[u8]) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MalformedCsv(format!("missing column {name}")))
    };
    let residency = col("residency_status")?;
    let gender = col("gender")?;
    let age = col("age")?;
    let label = col("label")?;
    let factors: Vec<usize> = FactorAnswers::NAMES.iter().map(|n| col(n)).collect::<Result<_>>()?;

    let enc = OffenderEncoding::default();
    let mut parsed = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("").trim().to_lowercase();
        let residency_status = match get(residency).as_str() {
            "migrant" => ResidencyStatus::Migrant,
            "non_migrant" | "non-migrant" => ResidencyStatus::NonMigrant,
            other => return Err(Error::invalid("residency_status", format!("{other:?}"))),
        };
        let gender = match get(gender).as_str() {
            "male" => Gender::Male,
            "female" => Gender::Female,
            other => return Err(Error::invalid("gender", format!("{other:?}"))),
        };
        let age: u32 = get(age)
            .parse()
            .map_err(|_| Error::invalid("age", format!("{:?}", get(age))))?;
        let mut answers = [Answer::Unknown; 10];
        for ((slot, &i), name) in answers.iter_mut().zip(&factors).zip(FactorAnswers::NAMES) {
            *slot = match get(i).as_str() {
                "yes" => Answer::Yes,
                "no" => Answer::No,
                "unknown" | "" => Answer::Unknown,
                other => return Err(Error::invalid(name, format!("{other:?}"))),
            };
        }
        let v = OffenderFactorVector {
            answers: FactorAnswers::from_values(answers),
            age,
            gender,
            residency_status,
        };
        v.validate()?;
        parsed.push((encode_offender(&v, None, enc), get(label)));
    }
    let classes: Vec<String> = parsed
        .iter()
        .map(|(_, l)| l.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rows = parsed
        .into_iter()
        .map(|(features, l)| Row {
            label: classes.iter().position(|c| *c == l).expect("label collected above"),
            features,
        })
        .collect();
    Dataset::new(offender_schema(enc), classes, rows)
}

//! Categorical Naive Bayes with additive (Laplace) smoothing.
//!
//! Unknown feature values are tallied separately and contribute no
//! likelihood factor at prediction time.

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, FeatureSpec};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub classes: Vec<String>,
    pub schema: Vec<FeatureSpec>,
    pub smoothing_alpha: f64,
    pub class_counts: Vec<u64>,
    /// `[feature][class][value]`
    pub feature_value_counts: Vec<Vec<Vec<u64>>>,
    /// `[feature][class]`: records whose value for the feature was unknown.
    pub missing_counts: Vec<Vec<u64>>,
}

pub const DEFAULT_ALPHA: f64 = 1.0;

pub fn train_naive_bayes(data: &Dataset, alpha: f64) -> Result<NaiveBayesModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("alpha", "must be a positive number"));
    }
    let n_classes = data.classes.len();
    let mut feature_value_counts: Vec<Vec<Vec<u64>>> = data
        .schema
        .iter()
        .map(|f| vec![vec![0; f.values.len()]; n_classes])
        .collect();
    let mut missing_counts = vec![vec![0u64; n_classes]; data.schema.len()];
    for row in &data.rows {
        for (f, v) in row.features.iter().enumerate() {
            match v {
                Some(v) => feature_value_counts[f][row.label][*v] += 1,
                None => missing_counts[f][row.label] += 1,
            }
        }
    }
    Ok(NaiveBayesModel {
        classes: data.classes.clone(),
        schema: data.schema.clone(),
        smoothing_alpha: alpha,
        class_counts: data.class_counts(),
        feature_value_counts,
        missing_counts,
    })
}

impl NaiveBayesModel {
    pub fn total(&self) -> u64 {
        self.class_counts.iter().sum()
    }

    /// Smoothed prior `(n_c + a) / (N + a |C|)`.
    pub fn prior<T: Real>(&self, class: usize) -> T {
        let a = T::lit(self.smoothing_alpha);
        (T::from_count(self.class_counts[class]) + a)
            / (T::from_count(self.total()) + a * T::from_count(self.classes.len() as u64))
    }

    /// Smoothed `P(feature = value | class)`; the denominator counts only
    /// records where the feature was known.
    pub fn likelihood<T: Real>(&self, feature: usize, class: usize, value: usize) -> T {
        let a = T::lit(self.smoothing_alpha);
        let known = self.class_counts[class] - self.missing_counts[feature][class];
        let n_values = T::from_count(self.schema[feature].values.len() as u64);
        (T::from_count(self.feature_value_counts[feature][class][value]) + a) / (T::from_count(known) + a * n_values)
    }

    fn check(&self, x: &[Option<usize>]) -> Result<()> {
        if x.len() != self.schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} features, got {}",
                self.schema.len(),
                x.len()
            )));
        }
        for (spec, v) in self.schema.iter().zip(x) {
            if matches!(v, Some(v) if *v >= spec.values.len()) {
                return Err(Error::SchemaMismatch(format!("value out of range for {}", spec.name)));
            }
        }
        Ok(())
    }

    /// Normalized class posterior for `x`, computed in log space.
    pub fn posterior<T: Real>(&self, x: &[Option<usize>]) -> Result<Vec<T>> {
        self.check(x)?;
        let logs: Vec<T> = (0..self.classes.len())
            .map(|c| {
                x.iter()
                    .enumerate()
                    .filter_map(|(f, v)| v.map(|v| self.likelihood::<T>(f, c, v).ln()))
                    .fold(self.prior::<T>(c).ln(), |acc, l| acc + l)
            })
            .collect();
        let z = log_sum_exp(&logs);
        Ok(logs.into_iter().map(|l| (l - z).exp()).collect())
    }

    /// Most probable class; ties go to the earliest declared class.
    pub fn predict(&self, x: &[Option<usize>]) -> Result<usize> {
        let p = self.posterior::<f64>(x)?;
        Ok(argmax(&p))
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

//! Seeded k-fold cross-validation.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::naive_bayes::train_naive_bayes;
use super::tree::train_decision_tree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum LearnerKind {
    NaiveBayes { alpha: f64 },
    DecisionTree { max_depth: usize, min_samples_leaf: usize },
}

impl LearnerKind {
    pub fn naive_bayes() -> Self {
        LearnerKind::NaiveBayes {
            alpha: super::naive_bayes::DEFAULT_ALPHA,
        }
    }

    pub fn tree() -> Self {
        LearnerKind::DecisionTree {
            max_depth: 8,
            min_samples_leaf: 1,
        }
    }
}

/// Shuffles `0..n` with `seed` and deals it into `k` contiguous folds; the
/// first `n % k` folds get one extra record.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::TooFewRecords { records: n, k });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub k: usize,
    pub classes: Vec<String>,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracy: Vec<f64>,
    /// Correct held-out predictions over all records, i.e. the fold
    /// accuracies weighted by fold size.
    pub mean_accuracy: f64,
    /// `[actual][predicted]`
    pub confusion: Vec<Vec<u64>>,
    /// `None` when the class was never predicted.
    pub precision: Vec<Option<f64>>,
    /// `None` when the class never occurs.
    pub recall: Vec<Option<f64>>,
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}-fold cross-validation", self.k)?;
        for (i, (acc, n)) in self.fold_accuracy.iter().zip(&self.fold_sizes).enumerate() {
            writeln!(f, "  fold {:>2}: accuracy {:.4} ({n} records)", i + 1, acc)?;
        }
        writeln!(f, "  mean accuracy: {:.4}", self.mean_accuracy)?;
        writeln!(f, "  confusion (rows = actual, cols = predicted): {}", self.classes.join(" | "))?;
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(|n| format!("{n:>5}")).collect();
            writeln!(f, "    {c:>12} {}", cells.join(" "))?;
        }
        let fmt_opt = |v: &Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        for (i, c) in self.classes.iter().enumerate() {
            writeln!(
                f,
                "  {c}: precision {} recall {}",
                fmt_opt(&self.precision[i]),
                fmt_opt(&self.recall[i])
            )?;
        }
        Ok(())
    }
}

/// Cross-validates any learner given as a fit function returning a
/// predictor closure.
pub fn cross_validate_with<F, P>(data: &Dataset, k: usize, seed: u64, fit: F) -> Result<EvaluationReport>
where
    F: Fn(&Dataset) -> Result<P>,
    P: Fn(&[Option<usize>]) -> Result<usize>,
{
    let folds = kfold(data.len(), k, seed)?;
    let n_classes = data.classes.len();
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    let mut fold_accuracy = Vec::with_capacity(k);
    let mut in_fold = vec![usize::MAX; data.len()];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            in_fold[i] = f;
        }
    }
    for (f, fold) in folds.iter().enumerate() {
        let train: Vec<usize> = (0..data.len()).filter(|&i| in_fold[i] != f).collect();
        let predict = fit(&data.subset(&train))?;
        let mut hits = 0usize;
        for &i in fold {
            let row = &data.rows[i];
            let p = predict(&row.features)?;
            confusion[row.label][p] += 1;
            hits += usize::from(p == row.label);
        }
        fold_accuracy.push(hits as f64 / fold.len() as f64);
    }
    let correct: u64 = (0..n_classes).map(|c| confusion[c][c]).sum();
    let precision = (0..n_classes)
        .map(|c| {
            let predicted: u64 = (0..n_classes).map(|a| confusion[a][c]).sum();
            (predicted > 0).then(|| confusion[c][c] as f64 / predicted as f64)
        })
        .collect();
    let recall = (0..n_classes)
        .map(|c| {
            let actual: u64 = confusion[c].iter().sum();
            (actual > 0).then(|| confusion[c][c] as f64 / actual as f64)
        })
        .collect();
    Ok(EvaluationReport {
        k,
        classes: data.classes.clone(),
        fold_sizes: folds.iter().map(Vec::len).collect(),
        fold_accuracy,
        mean_accuracy: correct as f64 / data.len() as f64,
        confusion,
        precision,
        recall,
    })
}

pub fn cross_validate(data: &Dataset, learner: LearnerKind, k: usize, seed: u64) -> Result<EvaluationReport> {
    match learner {
        LearnerKind::NaiveBayes { alpha } => cross_validate_with(data, k, seed, |train| {
            let m = train_naive_bayes(train, alpha)?;
            Ok(move |x: &[Option<usize>]| m.predict(x))
        }),
        LearnerKind::DecisionTree {
            max_depth,
            min_samples_leaf,
        } => cross_validate_with(data, k, seed, |train| {
            let m = train_decision_tree(train, max_depth, min_samples_leaf)?;
            Ok(move |x: &[Option<usize>]| m.predict(x).map(|p| p.class))
        }),
    }
}

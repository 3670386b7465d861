//! Crime prediction over offender factors (Naive Bayes and decision trees),
//! cross-validation, crime charts and likelihood summaries.
//!
//! After age is banded every feature is categorical, so all model tables
//! are exact finite tallies.

mod cv;
mod dataset;
mod naive_bayes;
mod reports;
mod tree;

pub use cv::{cross_validate, cross_validate_with, kfold, EvaluationReport, LearnerKind};
pub use dataset::{
    encode_named, encode_offender, import_offender_csv, offender_schema, Dataset, FeatureSpec, OffenderEncoding, Row,
};
pub use naive_bayes::{train_naive_bayes, NaiveBayesModel, DEFAULT_ALPHA};
pub use reports::{
    crime_chart, likelihood_report_for, offend_by_residency_dataset, reoffend_dataset, ChartGroupBy,
    GroupLikelihood, LikelihoodReport, LikelihoodTask,
};
pub use tree::{entropy, information_gain, train_decision_tree, DecisionTreeModel, TreeNode, TreePrediction, GAIN_TIE_EPS};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// A trained classifier in its exportable JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    NaiveBayes(NaiveBayesModel),
    DecisionTree(DecisionTreeModel),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub class: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior: Option<Vec<(String, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<(String, u64)>>,
}

impl TrainedModel {
    pub fn train(learner: LearnerKind, data: &Dataset) -> Result<Self> {
        Ok(match learner {
            LearnerKind::NaiveBayes { alpha } => TrainedModel::NaiveBayes(train_naive_bayes(data, alpha)?),
            LearnerKind::DecisionTree {
                max_depth,
                min_samples_leaf,
            } => TrainedModel::DecisionTree(train_decision_tree(data, max_depth, min_samples_leaf)?),
        })
    }

    pub fn schema(&self) -> &[FeatureSpec] {
        match self {
            TrainedModel::NaiveBayes(m) => &m.schema,
            TrainedModel::DecisionTree(m) => &m.schema,
        }
    }

    pub fn classes(&self) -> &[String] {
        match self {
            TrainedModel::NaiveBayes(m) => &m.classes,
            TrainedModel::DecisionTree(m) => &m.classes,
        }
    }

    pub fn predict(&self, x: &[Option<usize>]) -> Result<Prediction> {
        let classes = self.classes();
        Ok(match self {
            TrainedModel::NaiveBayes(m) => {
                let p = m.posterior::<f64>(x)?;
                Prediction {
                    class: classes[naive_bayes::argmax(&p)].clone(),
                    posterior: Some(classes.iter().cloned().zip(p).collect()),
                    support: None,
                }
            }
            TrainedModel::DecisionTree(m) => {
                let p = m.predict(x)?;
                Prediction {
                    class: classes[p.class].clone(),
                    posterior: None,
                    support: Some(classes.iter().cloned().zip(p.support).collect()),
                }
            }
        })
    }
}

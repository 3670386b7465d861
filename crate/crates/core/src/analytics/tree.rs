//! Greedy information-gain decision trees over categorical features.
//!
//! Records with an unknown value for the split feature follow the branch
//! holding the most known records (lowest value index on ties), both while
//! training and while predicting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, FeatureSpec, Row};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gains within this distance are treated as equal, so the lower feature
/// index wins regardless of floating-point summation order.
pub const GAIN_TIE_EPS: f64 = 1e-12;

/// Shannon entropy in bits of a class histogram.
pub fn entropy<T: Real>(counts: &[u64]) -> T {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return T::zero();
    }
    let n = T::from_count(n);
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = T::from_count(c) / n;
            -p * p.log2()
        })
        .fold(T::zero(), |a, b| a + b)
}

/// Rows of `rows` grouped by their value of `feature`, with unknowns folded
/// into the largest known branch. `None` when no row knows the feature.
pub(crate) fn partition(data: &Dataset, rows: &[usize], feature: usize) -> Option<(usize, BTreeMap<usize, Vec<usize>>)> {
    let mut branches: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut unknown = Vec::new();
    for &i in rows {
        match data.rows[i].features[feature] {
            Some(v) => branches.entry(v).or_default().push(i),
            None => unknown.push(i),
        }
    }
    // max_by_key keeps the last maximum; reverse so the lowest value wins ties
    let default = *branches.iter().rev().max_by_key(|(_, b)| b.len())?.0;
    branches.get_mut(&default).expect("default branch exists").extend(unknown);
    Some((default, branches))
}

fn histogram(data: &Dataset, rows: &[usize]) -> Vec<u64> {
    let mut h = vec![0u64; data.classes.len()];
    for &i in rows {
        h[data.rows[i].label] += 1;
    }
    h
}

fn gain_of<T: Real>(data: &Dataset, rows: &[usize], branches: &BTreeMap<usize, Vec<usize>>) -> T {
    let n = T::from_count(rows.len() as u64);
    let remainder = branches
        .values()
        .map(|b| T::from_count(b.len() as u64) / n * entropy::<T>(&histogram(data, b)))
        .fold(T::zero(), |a, b| a + b);
    entropy::<T>(&histogram(data, rows)) - remainder
}

/// `H(target) - sum_v |S_v|/|S| H(target | feature = v)` over all records.
pub fn information_gain<T: Real>(data: &Dataset, feature: usize) -> Result<T> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if feature >= data.schema.len() {
        return Err(Error::SchemaMismatch(format!("no feature {feature}")));
    }
    let rows: Vec<usize> = (0..data.len()).collect();
    Ok(match partition(data, &rows, feature) {
        Some((_, branches)) => gain_of::<T>(data, &rows, &branches).max(T::zero()),
        None => T::zero(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        class: usize,
        support: Vec<u64>,
    },
    Split {
        feature: usize,
        /// Answer for values never seen at this node during training.
        majority: usize,
        support: Vec<u64>,
        /// Branch taken by unknown values.
        default_value: usize,
        children: Vec<(usize, TreeNode)>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { children, .. } => 1 + children.iter().map(|(_, c)| c.depth()).max().unwrap_or(0),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { children, .. } => children.iter().map(|(_, c)| c.leaf_count()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub classes: Vec<String>,
    pub schema: Vec<FeatureSpec>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub root: TreeNode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreePrediction {
    pub class: usize,
    pub support: Vec<u64>,
}

/// Majority class; ties go to the earliest declared class.
fn majority(h: &[u64]) -> usize {
    h.iter()
        .enumerate()
        .fold((0, 0u64), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// Gain, feature, default value and branches of a candidate split.
type Candidate = (f64, usize, usize, BTreeMap<usize, Vec<usize>>);

struct Builder<'a> {
    data: &'a Dataset,
    max_depth: usize,
    min_samples_leaf: usize,
}

impl Builder<'_> {
    fn build(&self, rows: &[usize], used: &mut Vec<bool>, depth: usize) -> TreeNode {
        let support = histogram(self.data, rows);
        let class = majority(&support);
        let pure = support.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth {
            return TreeNode::Leaf { class, support };
        }

        let mut best: Option<Candidate> = None;
        for (f, &taken) in used.iter().enumerate() {
            if taken {
                continue;
            }
            let Some((default, branches)) = partition(self.data, rows, f) else {
                continue;
            };
            if branches.values().any(|b| b.len() < self.min_samples_leaf) {
                continue;
            }
            let g: f64 = gain_of(self.data, rows, &branches);
            if g <= GAIN_TIE_EPS {
                continue;
            }
            if best.as_ref().is_none_or(|(bg, ..)| g > bg + GAIN_TIE_EPS) {
                best = Some((g, f, default, branches));
            }
        }

        let Some((_, feature, default_value, branches)) = best else {
            return TreeNode::Leaf { class, support };
        };
        used[feature] = true;
        let children = branches
            .into_iter()
            .map(|(v, b)| (v, self.build(&b, used, depth + 1)))
            .collect();
        used[feature] = false;
        TreeNode::Split {
            feature,
            majority: class,
            support,
            default_value,
            children,
        }
    }
}

pub fn train_decision_tree(data: &Dataset, max_depth: usize, min_samples_leaf: usize) -> Result<DecisionTreeModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if max_depth == 0 {
        return Err(Error::invalid("max_depth", "must be at least 1"));
    }
    let min_samples_leaf = min_samples_leaf.max(1);
    let builder = Builder {
        data,
        max_depth,
        min_samples_leaf,
    };
    let rows: Vec<usize> = (0..data.len()).collect();
    let root = builder.build(&rows, &mut vec![false; data.schema.len()], 0);
    Ok(DecisionTreeModel {
        classes: data.classes.clone(),
        schema: data.schema.clone(),
        max_depth,
        min_samples_leaf,
        root,
    })
}

impl DecisionTreeModel {
    pub fn predict(&self, x: &[Option<usize>]) -> Result<TreePrediction> {
        if x.len() != self.schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} features, got {}",
                self.schema.len(),
                x.len()
            )));
        }
        if let Some((spec, _)) = self
            .schema
            .iter()
            .zip(x)
            .find(|(spec, v)| matches!(v, Some(v) if *v >= spec.values.len()))
        {
            return Err(Error::SchemaMismatch(format!("value out of range for {}", spec.name)));
        }
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class, support } => {
                    return Ok(TreePrediction {
                        class: *class,
                        support: support.clone(),
                    })
                }
                TreeNode::Split {
                    feature,
                    majority,
                    support,
                    default_value,
                    children,
                } => {
                    let v = x[*feature].unwrap_or(*default_value);
                    match children.iter().find(|(cv, _)| *cv == v) {
                        Some((_, child)) => node = child,
                        None => {
                            return Ok(TreePrediction {
                                class: *majority,
                                support: support.clone(),
                            })
                        }
                    }
                }
            }
        }
    }

    pub fn accuracy_on(&self, rows: &[Row]) -> Result<f64> {
        if rows.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0usize;
        for r in rows {
            if self.predict(&r.features)?.class == r.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / rows.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[(&[Option<usize>], usize)], n_features: usize) -> Dataset {
        let schema = (0..n_features)
            .map(|i| FeatureSpec::new(&format!("f{i}"), &["a", "b", "c"]))
            .collect();
        Dataset::new(
            schema,
            vec!["yes".into(), "no".into()],
            rows.iter()
                .map(|(f, l)| Row {
                    features: f.to_vec(),
                    label: *l,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn entropy_of_fair_coin_is_one_bit() {
        assert_eq!(entropy::<f64>(&[5, 5]), 1.0);
        assert_eq!(entropy::<f64>(&[7, 0]), 0.0);
        assert_eq!(entropy::<f64>(&[]), 0.0);
    }

    #[test]
    fn perfect_split_gains_one_bit() {
        let d = ds(&[(&[Some(0)], 0), (&[Some(0)], 0), (&[Some(1)], 1), (&[Some(1)], 1)], 1);
        assert!((information_gain::<f64>(&d, 0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn independent_feature_gains_nothing() {
        let d = ds(&[(&[Some(0)], 0), (&[Some(0)], 1), (&[Some(1)], 0), (&[Some(1)], 1)], 1);
        assert_eq!(information_gain::<f64>(&d, 0).unwrap(), 0.0);
        assert_eq!(information_gain::<f64>(&ds(&[], 1), 0).unwrap_err().code(), "EMPTY_DATASET");
    }

    #[test]
    fn pure_data_is_a_single_leaf() {
        let d = ds(&[(&[Some(0)], 0), (&[Some(1)], 0)], 1);
        let t = train_decision_tree(&d, 5, 1).unwrap();
        assert_eq!(
            t.root,
            TreeNode::Leaf {
                class: 0,
                support: vec![2, 0]
            }
        );
        assert_eq!(t.predict(&[Some(2)]).unwrap().class, 0);
    }

    #[test]
    fn dominant_feature_gives_depth_one_tree() {
        let d = ds(
            &[
                (&[Some(0), Some(0)], 1),
                (&[Some(1), Some(0)], 0),
                (&[Some(0), Some(1)], 1),
                (&[Some(1), Some(1)], 0),
            ],
            2,
        );
        let t = train_decision_tree(&d, 4, 1).unwrap();
        assert_eq!(t.root.depth(), 1);
        match &t.root {
            TreeNode::Split { feature, .. } => assert_eq!(*feature, 0),
            leaf => panic!("expected split, got {leaf:?}"),
        }
        assert_eq!(t.predict(&[Some(0), None]).unwrap().class, 1);
        assert_eq!(t.predict(&[Some(1), Some(2)]).unwrap().class, 0);
        // unseen value falls back to the node majority (tie -> first class)
        assert_eq!(t.predict(&[Some(2), None]).unwrap().class, 0);
    }

    #[test]
    fn min_samples_leaf_blocks_small_branches() {
        let d = ds(&[(&[Some(0)], 0), (&[Some(1)], 1), (&[Some(1)], 1), (&[Some(1)], 1)], 1);
        let t = train_decision_tree(&d, 3, 2).unwrap();
        assert!(matches!(t.root, TreeNode::Leaf { class: 1, .. }));
    }

    #[test]
    fn unknowns_follow_the_largest_branch() {
        let d = ds(&[(&[Some(0)], 0), (&[Some(1)], 1), (&[Some(1)], 1), (&[None], 1)], 1);
        let t = train_decision_tree(&d, 3, 1).unwrap();
        assert_eq!(t.predict(&[None]).unwrap().class, 1);
        match &t.root {
            TreeNode::Split { default_value, children, .. } => {
                assert_eq!(*default_value, 1);
                let (_, right) = children.iter().find(|(v, _)| *v == 1).unwrap();
                assert_eq!(
                    *right,
                    TreeNode::Leaf {
                        class: 1,
                        support: vec![0, 3]
                    }
                );
            }
            leaf => panic!("{leaf:?}"),
        }
    }

    #[test]
    fn zero_depth_is_rejected() {
        let d = ds(&[(&[Some(0)], 0)], 1);
        assert!(train_decision_tree(&d, 0, 1).is_err());
        assert_eq!(train_decision_tree(&ds(&[], 1), 2, 1).unwrap_err().code(), "EMPTY_DATASET");
    }
}

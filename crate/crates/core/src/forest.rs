//! Random forest of unpruned Gini trees.
//!
//! Trees are grown on bootstrap samples and consider a random subset of
//! `mtry` features at each node. Missing values are routed to the heavier
//! child at both training and prediction time, so the forest needs no
//! imputation.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Class;
use crate::error::{Error, Result};
use crate::prep::Dataset;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per node; `None` means `floor(log2 M) + 1`.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub master_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 1000,
            mtry: None,
            max_depth: None,
            min_samples_leaf: 1,
            master_seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if self.mtry == Some(0) {
            return Err(Error::invalid("mtry must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }

    pub fn effective_mtry(&self, n_features: usize) -> usize {
        let m = self.mtry.unwrap_or_else(|| default_mtry(n_features));
        m.clamp(1, n_features.max(1))
    }
}

pub fn default_mtry(n_features: usize) -> usize {
    if n_features == 0 {
        return 1;
    }
    (usize::BITS - 1 - n_features.leading_zeros()) as usize + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Where a missing value goes.
        missing_left: bool,
    },
    Leaf {
        /// Training counts indexed by [`Class::index`].
        counts: [u32; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf_for(&self, row: &[Option<f64>]) -> [u32; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return *counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    missing_left,
                } => {
                    let go_left = match row[*feature] {
                        Some(x) => x <= *threshold,
                        None => *missing_left,
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    /// Majority class of the reached leaf; ties go to Novice.
    pub fn predict(&self, row: &[Option<f64>]) -> Class {
        let c = self.leaf_for(row);
        if c[1] > c[0] {
            Class::Expert
        } else {
            Class::Novice
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub feature_names: Vec<String>,
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestPrediction {
    pub label: Class,
    /// Share of trees voting Expert.
    pub expert_fraction: f64,
}

impl ForestModel {
    pub fn predict(&self, row: &[Option<f64>]) -> Result<ForestPrediction> {
        if row.len() != self.feature_names.len() {
            return Err(Error::invalid(format!(
                "forest expects {} features, got {}",
                self.feature_names.len(),
                row.len()
            )));
        }
        let expert = self
            .trees
            .iter()
            .filter(|t| t.predict(row) == Class::Expert)
            .count();
        let frac = expert as f64 / self.trees.len() as f64;
        let label = if 2 * expert > self.trees.len() {
            Class::Expert
        } else {
            Class::Novice
        };
        Ok(ForestPrediction {
            label,
            expert_fraction: frac,
        })
    }

    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<ForestPrediction>> {
        if d.feature_names != self.feature_names {
            return Err(Error::invalid("dataset schema differs from the forest's"));
        }
        d.rows.iter().map(|r| self.predict(r)).collect()
    }
}

/// Gini impurity `1 - sum p_c^2` of a class-count vector.
pub fn gini_impurity(counts: &[u32]) -> Result<f64> {
    let n: u64 = counts.iter().map(|&c| c as u64).sum();
    if n == 0 {
        return Err(Error::invalid("gini impurity of an empty node"));
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

fn gini2(c: [u32; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = c[0] as f64 / n;
    2.0 * p * (1.0 - p)
}

fn weighted(c: [u32; 2]) -> f64 {
    (c[0] + c[1]) as f64 * gini2(c)
}

fn add(a: [u32; 2], b: [u32; 2]) -> [u32; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Largest value sent left.
    pub lower: f64,
    /// Smallest value sent right.
    pub upper: f64,
    pub missing_left: bool,
    /// Weighted impurity decrease, `n * parent - sum n_child * child`.
    pub gain: f64,
}

/// Best threshold on one feature for the samples `idx`, or `None` if no
/// threshold strictly reduces impurity while leaving `min_leaf` samples on
/// each side.
pub fn best_split_on_feature(
    rows: &[Vec<Option<f64>>],
    labels: &[Class],
    idx: &[usize],
    feature: usize,
    min_leaf: usize,
) -> Option<Split> {
    let mut present: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
    let mut missing = [0u32; 2];
    let mut total = [0u32; 2];
    for &i in idx {
        let c = labels[i].index();
        total[c] += 1;
        match rows[i][feature] {
            Some(x) => present.push((x, c)),
            None => missing[c] += 1,
        }
    }
    if present.len() < 2 {
        return None;
    }
    present.sort_by(|a, b| a.0.total_cmp(&b.0));
    let parent = weighted(total);
    let mut present_total = [0u32; 2];
    for &(_, c) in &present {
        present_total[c] += 1;
    }
    let mut left = [0u32; 2];
    let mut best: Option<Split> = None;
    for k in 0..present.len() - 1 {
        left[present[k].1] += 1;
        let (a, b) = (present[k].0, present[k + 1].0);
        if a >= b {
            continue;
        }
        let right = [present_total[0] - left[0], present_total[1] - left[1]];
        let n_left = left[0] + left[1];
        let n_right = right[0] + right[1];
        let missing_left = n_left >= n_right;
        let (l, r) = if missing_left {
            (add(left, missing), right)
        } else {
            (left, add(right, missing))
        };
        if ((l[0] + l[1]) as usize) < min_leaf || ((r[0] + r[1]) as usize) < min_leaf {
            continue;
        }
        let gain = parent - weighted(l) - weighted(r);
        if gain > 1e-12 * parent.max(1.0) && best.is_none_or(|s| gain > s.gain) {
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some(Split {
                feature,
                threshold,
                lower: a,
                upper: b,
                missing_left,
                gain,
            });
        }
    }
    best
}

struct Grower<'a> {
    rows: &'a [Vec<Option<f64>>],
    labels: &'a [Class],
    mtry: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    /// Sorted distinct values of each feature over the whole training set.
    distinct: &'a [Vec<f64>],
}

impl Grower<'_> {
    /// Every midpoint between consecutive distinct training values that
    /// lies in `(lower, upper)` gives the node the same partition. The one
    /// chosen is the middle candidate by rank, so the threshold depends on
    /// the order of the training values only and trees are invariant under
    /// strictly increasing transforms of a feature.
    fn rank_threshold(&self, feature: usize, lower: f64, upper: f64) -> f64 {
        let values = &self.distinct[feature];
        let lo = values.partition_point(|v| *v < lower);
        let hi = values.partition_point(|v| *v < upper);
        let k = lo + (hi - lo) / 2;
        let (a, b) = match (values.get(k), values.get(k + 1)) {
            (Some(&a), Some(&b)) if k < hi => (a, b),
            _ => (lower, upper),
        };
        let mid = a + (b - a) / 2.0;
        if mid >= b {
            a
        } else {
            mid
        }
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let mut counts = [0u32; 2];
        for &i in &idx {
            counts[self.labels[i].index()] += 1;
        }
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || self.max_depth.is_some_and(|d| depth >= d) || idx.len() < 2 * self.min_leaf {
            return slot;
        }
        let m = self.rows[0].len();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<Split> = None;
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some(s) = best_split_on_feature(self.rows, self.labels, &idx, f, self.min_leaf) {
                if best.is_none_or(|b| s.gain > b.gain) {
                    best = Some(s);
                }
            }
        }
        let Some(mut split) = best else {
            return slot;
        };
        split.threshold = self.rank_threshold(split.feature, split.lower, split.upper);
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter()
                .partition(|&i| match self.rows[i][split.feature] {
                    Some(x) => x <= split.threshold,
                    None => split.missing_left,
                });
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            missing_left: split.missing_left,
        };
        slot
    }
}

/// `n` draws with replacement from `0..n`.
pub fn bootstrap_indices(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn check_trainable(d: &Dataset) -> Result<()> {
    if d.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if d.n_features() == 0 {
        return Err(Error::invalid("cannot train without features"));
    }
    if d.class_counts().contains(&0) {
        return Err(Error::invalid("training set contains a single class"));
    }
    Ok(())
}

fn distinct_values(d: &Dataset) -> Vec<Vec<f64>> {
    (0..d.n_features())
        .map(|j| {
            let mut v: Vec<f64> = d.rows.iter().filter_map(|r| r[j]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect()
}

fn grow_tree(
    d: &Dataset,
    distinct: &[Vec<f64>],
    cfg: &ForestConfig,
    t: usize,
) -> (Tree, Vec<usize>) {
    let mut rng = rng_from_seed(derive_seed(cfg.master_seed, t as u64));
    let sample = bootstrap_indices(d.len(), &mut rng);
    let mut g = Grower {
        rows: &d.rows,
        labels: &d.labels,
        mtry: cfg.effective_mtry(d.n_features()),
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_samples_leaf,
        rng,
        nodes: Vec::new(),
        distinct,
    };
    g.grow(sample.clone(), 0);
    (Tree { nodes: g.nodes }, sample)
}

/// Trains a forest. Tree `t` uses the seed derived from the master seed and
/// `t`, so the result does not depend on thread scheduling.
pub fn train_forest(d: &Dataset, cfg: &ForestConfig) -> Result<ForestModel> {
    cfg.validate()?;
    check_trainable(d)?;
    let distinct = distinct_values(d);
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(d, &distinct, cfg, t).0)
        .collect();
    Ok(ForestModel {
        feature_names: d.feature_names.clone(),
        config: cfg.clone(),
        trees,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OobReport {
    /// Rows that were out of bag for at least one tree.
    pub covered: usize,
    pub accuracy: f64,
    pub predictions: Vec<Option<Class>>,
}

/// Trains a forest and scores each row using only the trees whose
/// bootstrap sample left it out.
pub fn train_forest_oob(d: &Dataset, cfg: &ForestConfig) -> Result<(ForestModel, OobReport)> {
    cfg.validate()?;
    check_trainable(d)?;
    let grown: Vec<(Tree, Vec<usize>)> = {
        let distinct = distinct_values(d);
        (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| grow_tree(d, &distinct, cfg, t))
            .collect()
    };
    let mut votes = vec![[0u32; 2]; d.len()];
    for (tree, sample) in &grown {
        let mut in_bag = vec![false; d.len()];
        for &i in sample {
            in_bag[i] = true;
        }
        for (i, row) in d.rows.iter().enumerate() {
            if !in_bag[i] {
                votes[i][tree.predict(row).index()] += 1;
            }
        }
    }
    let predictions: Vec<Option<Class>> = votes
        .iter()
        .map(|v| match v[0] + v[1] {
            0 => None,
            _ if v[1] > v[0] => Some(Class::Expert),
            _ => Some(Class::Novice),
        })
        .collect();
    let covered = predictions.iter().filter(|p| p.is_some()).count();
    let correct = predictions
        .iter()
        .zip(&d.labels)
        .filter(|(p, l)| **p == Some(**l))
        .count();
    let accuracy = if covered > 0 {
        correct as f64 / covered as f64
    } else {
        0.0
    };
    let model = ForestModel {
        feature_names: d.feature_names.clone(),
        config: cfg.clone(),
        trees: grown.into_iter().map(|(t, _)| t).collect(),
    };
    Ok((
        model,
        OobReport {
            covered,
            accuracy,
            predictions,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: Vec<Vec<Option<f64>>>, labels: Vec<Class>) -> Dataset {
        let m = rows[0].len();
        let n = rows.len();
        Dataset::new(
            (0..m).map(|j| format!("f{j}")).collect(),
            rows,
            labels,
            (0..n).map(|i| i.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn gini_fixtures() {
        assert_eq!(gini_impurity(&[5, 5]).unwrap(), 0.5);
        assert_eq!(gini_impurity(&[7, 0]).unwrap(), 0.0);
        assert!(gini_impurity(&[0, 0]).is_err());
    }

    #[test]
    fn default_mtry_values() {
        assert_eq!(default_mtry(1), 1);
        assert_eq!(default_mtry(6), 3);
        assert_eq!(default_mtry(7), 3);
        assert_eq!(default_mtry(8), 4);
        assert_eq!(default_mtry(13), 4);
    }

    #[test]
    fn split_threshold_is_the_midpoint() {
        let rows = vec![
            vec![Some(1.0)],
            vec![Some(2.0)],
            vec![Some(4.0)],
            vec![Some(6.0)],
        ];
        let labels = vec![Class::Novice, Class::Novice, Class::Expert, Class::Expert];
        let s = best_split_on_feature(&rows, &labels, &[0, 1, 2, 3], 0, 1).unwrap();
        assert_eq!(s.threshold, 3.0);
    }

    #[test]
    fn separated_pairs_split_in_the_gap() {
        let rows = vec![
            vec![Some(1.0)],
            vec![Some(2.0)],
            vec![Some(8.0)],
            vec![Some(9.0)],
        ];
        let labels = vec![Class::Novice, Class::Novice, Class::Expert, Class::Expert];
        let s = best_split_on_feature(&rows, &labels, &[0, 1, 2, 3], 0, 1).unwrap();
        assert_eq!(s.threshold, 5.0);
        assert!((s.gain - 2.0).abs() < 1e-12);
        assert!(best_split_on_feature(&rows, &labels, &[0, 1], 0, 1).is_none());
    }

    #[test]
    fn single_class_training_is_rejected() {
        let d = ds(
            vec![vec![Some(1.0)], vec![Some(2.0)]],
            vec![Class::Expert; 2],
        );
        assert!(train_forest(&d, &ForestConfig::default()).is_err());
    }

    #[test]
    fn missing_values_follow_the_heavier_child() {
        let rows = vec![
            vec![Some(1.0)],
            vec![Some(2.0)],
            vec![Some(3.0)],
            vec![Some(10.0)],
            vec![None],
        ];
        let labels = vec![
            Class::Novice,
            Class::Novice,
            Class::Novice,
            Class::Expert,
            Class::Expert,
        ];
        let s = best_split_on_feature(&rows, &labels, &[0, 1, 2, 3, 4], 0, 1).unwrap();
        assert_eq!(s.threshold, 6.5);
        assert!(s.missing_left);
    }

    #[test]
    fn constant_feature_does_not_split() {
        let rows = vec![vec![Some(1.0)]; 4];
        let labels = vec![Class::Novice, Class::Expert, Class::Novice, Class::Expert];
        assert!(best_split_on_feature(&rows, &labels, &[0, 1, 2, 3], 0, 1).is_none());
    }

    #[test]
    fn forest_learns_a_threshold() {
        let rows: Vec<Vec<Option<f64>>> = (0..40)
            .map(|i| vec![Some(i as f64), Some((i * 7 % 5) as f64)])
            .collect();
        let labels = (0..40)
            .map(|i| if i < 20 { Class::Novice } else { Class::Expert })
            .collect();
        let d = ds(rows, labels);
        let cfg = ForestConfig {
            n_trees: 25,
            master_seed: 3,
            ..Default::default()
        };
        let m = train_forest(&d, &cfg).unwrap();
        assert_eq!(
            m.predict(&[Some(2.0), Some(0.0)]).unwrap().label,
            Class::Novice
        );
        assert_eq!(
            m.predict(&[Some(38.0), Some(0.0)]).unwrap().label,
            Class::Expert
        );
        assert!(m.predict(&[Some(1.0)]).is_err());
        assert_eq!(train_forest(&d, &cfg).unwrap(), m);
    }

    #[test]
    fn depth_limit_is_honored() {
        let rows: Vec<Vec<Option<f64>>> = (0..64).map(|i| vec![Some(i as f64)]).collect();
        let labels = (0..64)
            .map(|i| {
                if i % 2 == 0 {
                    Class::Novice
                } else {
                    Class::Expert
                }
            })
            .collect();
        let d = ds(rows, labels);
        let cfg = ForestConfig {
            n_trees: 5,
            max_depth: Some(2),
            ..Default::default()
        };
        let m = train_forest(&d, &cfg).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn vote_ties_go_to_novice() {
        let leaf = |c: [u32; 2]| Tree {
            nodes: vec![Node::Leaf { counts: c }],
        };
        let m = ForestModel {
            feature_names: vec!["f0".into()],
            config: ForestConfig::default(),
            trees: vec![leaf([0, 3]), leaf([3, 0]), leaf([2, 2])],
        };
        let p = m.predict(&[Some(0.0)]).unwrap();
        assert_eq!(p.label, Class::Novice);
        assert!((p.expert_fraction - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn oob_report_covers_rows() {
        let rows: Vec<Vec<Option<f64>>> = (0..50).map(|i| vec![Some(i as f64)]).collect();
        let labels = (0..50)
            .map(|i| if i < 25 { Class::Novice } else { Class::Expert })
            .collect();
        let d = ds(rows, labels);
        let cfg = ForestConfig {
            n_trees: 50,
            ..Default::default()
        };
        let (_, r) = train_forest_oob(&d, &cfg).unwrap();
        assert_eq!(r.covered, 50);
        assert!(r.accuracy > 0.85, "{}", r.accuracy);
    }
}

//! Dataset conditioning between extraction and learning: class balancing,
//! mean imputation + min-max normalization, and correlation-based
//! best-first feature selection.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashSet};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::corpus::Class;
use crate::error::{Error, Result};
use crate::features::{FeatureId, FeatureVector};
use crate::seed::rng_from_seed;

/// A labeled table with named columns and optional (missing) cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub labels: Vec<Class>,
    pub ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
        labels: Vec<Class>,
        ids: Vec<String>,
    ) -> Result<Dataset> {
        if rows.len() != labels.len() || rows.len() != ids.len() {
            return Err(Error::invalid("rows, labels and ids differ in length"));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != feature_names.len()) {
            return Err(Error::invalid(format!(
                "row {r} has {} values for {} features",
                rows[r].len(),
                feature_names.len()
            )));
        }
        Ok(Dataset {
            feature_names,
            rows,
            labels,
            ids,
        })
    }

    /// Builds a dataset over `features` from labeled vectors. Unlabeled
    /// vectors are an error; features absent from a vector become missing.
    pub fn from_vectors(vectors: &[FeatureVector], features: &[FeatureId]) -> Result<Dataset> {
        let mut rows = Vec::with_capacity(vectors.len());
        let mut labels = Vec::with_capacity(vectors.len());
        let mut ids = Vec::with_capacity(vectors.len());
        for v in vectors {
            let class = v.label.class().ok_or_else(|| {
                Error::invalid(format!("session `{}` is unlabeled", v.session_id))
            })?;
            rows.push(features.iter().map(|f| v.get(*f)).collect());
            labels.push(class);
            ids.push(v.session_id.clone());
        }
        Dataset::new(
            features.iter().map(|f| f.name().to_string()).collect(),
            rows,
            labels,
            ids,
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }

    /// Columns at `columns`, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Dataset {
        Dataset {
            feature_names: columns
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            rows: self
                .rows
                .iter()
                .map(|r| columns.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            ids: self.ids.clone(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Columns by name; unknown names are an error.
    pub fn select_named(&self, names: &[String]) -> Result<Dataset> {
        let cols = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::invalid(format!("dataset has no feature `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&cols))
    }

    pub fn select_features(&self, features: &[FeatureId]) -> Result<Dataset> {
        let names: Vec<String> = features.iter().map(|f| f.name().to_string()).collect();
        self.select_named(&names)
    }
}

/// Downsamples every class, uniformly without replacement, to the minority
/// class size. Surviving rows keep their relative order.
pub fn spread_subsample(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    let counts = dataset.class_counts();
    if counts.contains(&0) {
        return Err(Error::invalid(
            "spread subsample needs both classes present",
        ));
    }
    let target = counts[0].min(counts[1]);
    let mut rng = rng_from_seed(seed);
    let mut keep = vec![false; dataset.len()];
    for class in Class::ORDER {
        let members: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.labels[i] == class)
            .collect();
        for k in sample(&mut rng, members.len(), target).into_iter() {
            keep[members[k]] = true;
        }
    }
    let indices: Vec<usize> = (0..dataset.len()).filter(|&i| keep[i]).collect();
    Ok(dataset.subset(&indices))
}

/// Training-split statistics for mean imputation and min-max scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditioner {
    pub feature_names: Vec<String>,
    pub imputation_means: Vec<f64>,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Conditioner {
    pub fn fit(train: &Dataset) -> Result<Conditioner> {
        let m = train.n_features();
        let mut means = Vec::with_capacity(m);
        let mut mins = Vec::with_capacity(m);
        let mut maxs = Vec::with_capacity(m);
        for j in 0..m {
            let present: Vec<f64> = train.rows.iter().filter_map(|r| r[j]).collect();
            if present.is_empty() {
                return Err(Error::AllMissing(train.feature_names[j].clone()));
            }
            means.push(present.iter().sum::<f64>() / present.len() as f64);
            mins.push(present.iter().copied().fold(f64::INFINITY, f64::min));
            maxs.push(present.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        Ok(Conditioner {
            feature_names: train.feature_names.clone(),
            imputation_means: means,
            mins,
            maxs,
        })
    }

    /// Imputes then scales one row. Values outside the training range are
    /// not clamped. Constant training columns map to 0.
    pub fn transform_row(&self, row: &[Option<f64>]) -> Result<Vec<f64>> {
        if row.len() != self.feature_names.len() {
            return Err(Error::invalid(format!(
                "conditioner expects {} features, got {}",
                self.feature_names.len(),
                row.len()
            )));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let x = v.unwrap_or(self.imputation_means[j]);
                let range = self.maxs[j] - self.mins[j];
                if range > 0.0 {
                    (x - self.mins[j]) / range
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
        if dataset.feature_names != self.feature_names {
            return Err(Error::invalid(
                "dataset schema differs from the conditioner's",
            ));
        }
        dataset.rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

pub fn fit_conditioner(train: &Dataset) -> Result<Conditioner> {
    Conditioner::fit(train)
}

/// Conditioned copy of `d` with every cell present.
pub fn apply_conditioner(c: &Conditioner, d: &Dataset) -> Result<Dataset> {
    let rows = c.apply(d)?;
    Ok(Dataset {
        feature_names: d.feature_names.clone(),
        rows: rows
            .into_iter()
            .map(|r| r.into_iter().map(Some).collect())
            .collect(),
        labels: d.labels.clone(),
        ids: d.ids.clone(),
    })
}

pub const DEFAULT_BINS: usize = 10;

/// Equal-frequency discretization of one column into at most `bins` bins.
/// Cut points are drawn from the sorted present values; ties never straddle
/// a cut. Missing values get their own bin, one past the last.
pub fn discretize_equal_frequency(column: &[Option<f64>], bins: usize) -> Vec<usize> {
    let mut present: Vec<f64> = column.iter().flatten().copied().collect();
    present.sort_by(f64::total_cmp);
    let n = present.len();
    let mut cuts: Vec<f64> = Vec::new();
    if n > 0 && bins > 1 {
        for b in 1..bins {
            let pos = b * n / bins;
            if pos == 0 || pos >= n {
                continue;
            }
            // cut between present[pos-1] and present[pos], only if distinct
            if present[pos - 1] < present[pos] {
                let cut = present[pos - 1];
                if cuts.last().is_none_or(|&c| c < cut) {
                    cuts.push(cut);
                }
            }
        }
    }
    let missing_bin = cuts.len() + 1;
    column
        .iter()
        .map(|v| match v {
            Some(x) => cuts.partition_point(|&c| c < *x),
            None => missing_bin,
        })
        .collect()
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Symmetrical uncertainty `2 I(X;Y) / (H(X) + H(Y))` with natural-log
/// entropies; 0 when either entropy is 0.
pub fn symmetrical_uncertainty(x: &[usize], y: &[usize]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let n = x.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut px: BTreeMap<usize, usize> = BTreeMap::new();
    let mut py: BTreeMap<usize, usize> = BTreeMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_default() += 1;
        *px.entry(a).or_default() += 1;
        *py.entry(b).or_default() += 1;
    }
    let hx = entropy(px.values().copied(), n);
    let hy = entropy(py.values().copied(), n);
    if hx <= 0.0 || hy <= 0.0 {
        return Ok(0.0);
    }
    let hxy = entropy(joint.values().copied(), n);
    let info = hx + hy - hxy;
    Ok((2.0 * info / (hx + hy)).clamp(0.0, 1.0))
}

/// Discretized dataset with cached symmetrical uncertainties, shared by all
/// merit evaluations of one search.
pub struct CfsEvaluator {
    class_su: Vec<f64>,
    pair_su: Vec<Vec<f64>>,
}

impl CfsEvaluator {
    pub fn new(dataset: &Dataset) -> CfsEvaluator {
        let m = dataset.n_features();
        let y: Vec<usize> = dataset.labels.iter().map(|c| c.index()).collect();
        let cols: Vec<Vec<usize>> = (0..m)
            .map(|j| discretize_equal_frequency(&dataset.column(j), DEFAULT_BINS))
            .collect();
        let class_su = cols
            .iter()
            .map(|c| symmetrical_uncertainty(c, &y).expect("equal lengths"))
            .collect();
        let mut pair_su = vec![vec![1.0; m]; m];
        for a in 0..m {
            for b in (a + 1)..m {
                let su = symmetrical_uncertainty(&cols[a], &cols[b]).expect("equal lengths");
                pair_su[a][b] = su;
                pair_su[b][a] = su;
            }
        }
        CfsEvaluator { class_su, pair_su }
    }

    pub fn class_correlation(&self, feature: usize) -> f64 {
        self.class_su[feature]
    }

    /// `k r_cf / sqrt(k + k(k-1) r_ff)`. The subset is sorted first so the
    /// result does not depend on member order.
    pub fn merit(&self, subset: &[usize]) -> f64 {
        let mut s = subset.to_vec();
        s.sort_unstable();
        s.dedup();
        let k = s.len();
        if k == 0 {
            return 0.0;
        }
        let kf = k as f64;
        let r_cf = s.iter().map(|&f| self.class_su[f]).sum::<f64>() / kf;
        let mut pair_sum = 0.0;
        for (i, &a) in s.iter().enumerate() {
            for &b in &s[i + 1..] {
                pair_sum += self.pair_su[a][b];
            }
        }
        let r_ff = if k > 1 {
            pair_sum / (kf * (kf - 1.0) / 2.0)
        } else {
            0.0
        };
        let denom = (kf + kf * (kf - 1.0) * r_ff).sqrt();
        if denom > 0.0 {
            kf * r_cf / denom
        } else {
            0.0
        }
    }
}

/// CFS merit of a subset of column indices.
pub fn cfs_merit(subset: &[usize], dataset: &Dataset) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::invalid("cfs merit of an empty subset"));
    }
    if let Some(&bad) = subset.iter().find(|&&j| j >= dataset.n_features()) {
        return Err(Error::invalid(format!("feature index {bad} out of range")));
    }
    Ok(CfsEvaluator::new(dataset).merit(subset))
}

pub const DEFAULT_TERMINATION: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub subset: Vec<String>,
    pub merit: f64,
    /// Whether this expansion produced a new global best.
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: Vec<String>,
    pub selected_indices: Vec<usize>,
    pub merit: f64,
    /// Every subset evaluated, in evaluation order.
    pub search_trace: Vec<(Vec<String>, f64)>,
    pub expansions: Vec<Expansion>,
    pub termination: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    subset: Vec<usize>,
    merit: f64,
}

/// `Greater` means "preferred": higher merit, then the smaller subset, then
/// the lexicographically smaller one.
fn preference(a: &Node, b: &Node) -> Ordering {
    a.merit
        .total_cmp(&b.merit)
        .then_with(|| b.subset.len().cmp(&a.subset.len()))
        .then_with(|| b.subset.cmp(&a.subset))
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        preference(self, other)
    }
}

/// Forward best-first search over feature subsets scored by CFS merit.
///
/// Starts from the empty set, repeatedly expands the most preferred open
/// subset by every single-feature addition, and stops after `termination`
/// consecutive expansions that do not improve the best subset found.
pub fn best_first_select(dataset: &Dataset, termination: usize) -> Result<SelectionResult> {
    let m = dataset.n_features();
    if m == 0 {
        return Err(Error::invalid(
            "feature selection needs at least one feature",
        ));
    }
    let termination = termination.max(1);
    let eval = CfsEvaluator::new(dataset);
    let names = |s: &[usize]| {
        s.iter()
            .map(|&j| dataset.feature_names[j].clone())
            .collect::<Vec<_>>()
    };

    let mut open = BinaryHeap::new();
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    let mut trace = Vec::new();
    let mut expansions = Vec::new();
    let mut best: Option<Node> = None;
    let mut stale = 0;

    open.push(Node {
        subset: Vec::new(),
        merit: 0.0,
    });
    visited.insert(Vec::new());

    while let Some(node) = open.pop() {
        let mut improved = false;
        for f in 0..m {
            if node.subset.contains(&f) {
                continue;
            }
            let mut child = node.subset.clone();
            child.push(f);
            child.sort_unstable();
            if !visited.insert(child.clone()) {
                continue;
            }
            let merit = eval.merit(&child);
            trace.push((names(&child), merit));
            let child = Node {
                subset: child,
                merit,
            };
            if best
                .as_ref()
                .is_none_or(|b| preference(&child, b) == Ordering::Greater)
            {
                best = Some(child.clone());
                improved = true;
            }
            open.push(child);
        }
        expansions.push(Expansion {
            subset: names(&node.subset),
            merit: node.merit,
            improved,
        });
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= termination {
                break;
            }
        }
    }

    let best = best.expect("at least one singleton was evaluated");
    Ok(SelectionResult {
        selected: names(&best.subset),
        selected_indices: best.subset,
        merit: best.merit,
        search_trace: trace,
        expansions,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn ds(cols: Vec<Vec<Option<f64>>>, labels: Vec<Class>) -> Dataset {
        let n = labels.len();
        let names = (0..cols.len()).map(|j| format!("f{j}")).collect();
        let rows = (0..n)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        Dataset::new(
            names,
            rows,
            labels,
            (0..n).map(|i| format!("r{i}")).collect(),
        )
        .unwrap()
    }

    fn labels(novice: usize, expert: usize) -> Vec<Class> {
        let mut v = vec![Class::Novice; novice];
        v.extend(vec![Class::Expert; expert]);
        v
    }

    #[test]
    fn spread_subsample_balances() {
        let l = labels(235, 80);
        let col: Vec<Option<f64>> = (0..315).map(|i| Some(i as f64)).collect();
        let d = ds(vec![col], l);
        let b = spread_subsample(&d, 1).unwrap();
        assert_eq!(b.class_counts(), [80, 80]);
        let pos: Vec<usize> = b
            .ids
            .iter()
            .map(|id| d.ids.iter().position(|x| x == id).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "order preserved");
        assert_eq!(spread_subsample(&d, 1).unwrap(), b);
        assert_ne!(spread_subsample(&d, 2).unwrap().ids, b.ids);
    }

    #[test]
    fn spread_subsample_keeps_balanced_and_rejects_single_class() {
        let d = ds(
            vec![(0..20).map(|i| Some(i as f64)).collect()],
            labels(10, 10),
        );
        assert_eq!(spread_subsample(&d, 9).unwrap(), d);
        let one = ds(vec![vec![Some(1.0); 5]], labels(5, 0));
        assert!(spread_subsample(&one, 0).is_err());
    }

    #[test]
    fn conditioner_contract() {
        let train = ds(vec![vec![Some(0.0), Some(10.0), None]], labels(2, 1));
        let c = fit_conditioner(&train).unwrap();
        assert_eq!(c.transform_row(&[Some(5.0)]).unwrap(), vec![0.5]);
        assert_eq!(c.transform_row(&[Some(20.0)]).unwrap(), vec![2.0]);
        // missing -> training mean 5 -> 0.5
        assert_eq!(c.transform_row(&[None]).unwrap(), vec![0.5]);
        let all_missing = ds(vec![vec![None, None]], labels(1, 1));
        match fit_conditioner(&all_missing) {
            Err(Error::AllMissing(name)) => assert_eq!(name, "f0"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn su_fixtures() {
        let y = [0, 0, 1, 1, 0, 1];
        assert!((symmetrical_uncertainty(&y, &y).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(symmetrical_uncertainty(&[3; 6], &y).unwrap(), 0.0);
        assert!(symmetrical_uncertainty(&[0, 1], &y).is_err());
    }

    #[test]
    fn su_of_independent_noise_vanishes() {
        let mut rng = rng_from_seed(5);
        let n = 10_000;
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let col: Vec<Option<f64>> = (0..n).map(|_| Some(rng.random::<f64>())).collect();
        let x = discretize_equal_frequency(&col, DEFAULT_BINS);
        let su = symmetrical_uncertainty(&x, &y).unwrap();
        assert!(su < 0.05, "{su}");
    }

    #[test]
    fn discretization_respects_ties_and_missing() {
        let col = vec![Some(1.0), Some(0.0), Some(1.0), Some(0.0), None];
        let b = discretize_equal_frequency(&col, 10);
        assert_eq!(b, vec![1, 0, 1, 0, 2]);
        let uniform: Vec<Option<f64>> = (0..100).map(|i| Some(i as f64)).collect();
        let b = discretize_equal_frequency(&uniform, 10);
        assert_eq!(*b.iter().max().unwrap(), 9);
        assert!((0..10).all(|k| b.iter().filter(|&&x| x == k).count() == 10));
    }

    fn informative_plus_noise(seed: u64, noise: usize) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let n = 400;
        let l: Vec<Class> = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    Class::Novice
                } else {
                    Class::Expert
                }
            })
            .collect();
        let mut cols = vec![l
            .iter()
            .map(|c| Some(c.index() as f64 * 2.0 + rng.random::<f64>()))
            .collect::<Vec<_>>()];
        for _ in 0..noise {
            cols.push((0..n).map(|_| Some(rng.random::<f64>())).collect());
        }
        ds(cols, l)
    }

    #[test]
    fn merit_reduces_for_singletons_and_redundancy() {
        let d = informative_plus_noise(1, 1);
        let eval = CfsEvaluator::new(&d);
        assert!((cfs_merit(&[0], &d).unwrap() - eval.class_correlation(0)).abs() < 1e-15);
        let dup = ds(vec![d.column(0), d.column(0)], d.labels.clone());
        // r_ff = 1 gives 2r / sqrt(2 + 2) = r: a copy adds nothing
        let single = cfs_merit(&[0], &dup).unwrap();
        let both = cfs_merit(&[0, 1], &dup).unwrap();
        assert!((both - single).abs() < 1e-12, "{both} vs {single}");
        assert!(cfs_merit(&[], &d).is_err());
    }

    #[test]
    fn noise_subset_has_near_zero_merit() {
        let d = informative_plus_noise(2, 4);
        assert!(cfs_merit(&[1, 2, 3, 4], &d).unwrap() < 0.05);
    }

    #[test]
    fn best_first_keeps_only_the_informative_feature() {
        let d = informative_plus_noise(3, 5);
        let r = best_first_select(&d, DEFAULT_TERMINATION).unwrap();
        assert_eq!(r.selected, vec!["f0".to_string()]);
        assert_eq!(r.merit, cfs_merit(&r.selected_indices, &d).unwrap());
    }

    #[test]
    fn identical_copies_select_one() {
        let d = informative_plus_noise(4, 0);
        let copies = ds(vec![d.column(0); 4], d.labels.clone());
        let r = best_first_select(&copies, DEFAULT_TERMINATION).unwrap();
        assert_eq!(r.selected_indices.len(), 1);
    }

    #[test]
    fn termination_counts_stale_expansions() {
        let d = informative_plus_noise(6, 5);
        for t in [1, 2, 5] {
            let r = best_first_select(&d, t).unwrap();
            let mut run = 0;
            for (i, e) in r.expansions.iter().enumerate() {
                run = if e.improved { 0 } else { run + 1 };
                if i + 1 < r.expansions.len() {
                    assert!(run < t, "search continued past {t} stale expansions");
                }
            }
            assert_eq!(run, t);
        }
    }
}

//! Evaluation protocol: confusion matrices, accuracy, Cohen's kappa,
//! stratified k-fold cross-validation, cross-corpus evaluation, and
//! turn-by-turn incremental classification.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Class, Session};
use crate::error::{Error, Result};
use crate::features::{extract_unchecked, ExtractionConfig, FeatureId, FeatureSetId};
use crate::model::{model_digest, train_model, LearnerSpec, TrainedModel};
use crate::prep::{best_first_select, spread_subsample, Dataset, DEFAULT_TERMINATION};
use crate::seed::{derive_seed, rng_from_seed};

/// Counts indexed `[actual][predicted]` over (Novice, Expert).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; 2]; 2]) -> ConfusionMatrix {
        ConfusionMatrix { counts }
    }

    pub fn from_pairs(actual: &[Class], predicted: &[Class]) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::default();
        for (a, p) in actual.iter().zip(predicted) {
            m.add(*a, *p);
        }
        m
    }

    pub fn add(&mut self, actual: Class, predicted: Class) {
        self.counts[actual.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for a in 0..2 {
            for p in 0..2 {
                self.counts[a][p] += other.counts[a][p];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> Result<f64> {
        accuracy(self)
    }

    pub fn kappa(&self) -> Result<f64> {
        kappa(self)
    }
}

fn nonempty(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::invalid("metrics of an empty confusion matrix")),
        n => Ok(n as f64),
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let n = nonempty(cm)?;
    Ok((cm.counts[0][0] + cm.counts[1][1]) as f64 / n)
}

/// Cohen's kappa, computed from integer counts as
/// `(n * agree - sum(row * col)) / (n^2 - sum(row * col))` so that exact
/// ratios stay exact. When chance agreement is 1 the statistic is
/// undefined; it is reported as 1 for perfect agreement and 0 otherwise.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    nonempty(cm)?;
    let c = cm.counts.map(|r| r.map(u128::from));
    let n = c[0][0] + c[0][1] + c[1][0] + c[1][1];
    let agree = c[0][0] + c[1][1];
    let chance: u128 = (0..2)
        .map(|k| (c[k][0] + c[k][1]) * (c[0][k] + c[1][k]))
        .sum();
    let den = n * n - chance;
    if den == 0 {
        return Ok(if agree == n { 1.0 } else { 0.0 });
    }
    let num = (n * agree) as i128 - chance as i128;
    Ok(num as f64 / den as f64)
}

/// Share of the majority class.
pub fn chance_accuracy(labels: &[Class]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("chance accuracy of an empty label set"));
    }
    let expert = labels.iter().filter(|c| **c == Class::Expert).count();
    Ok(expert.max(labels.len() - expert) as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// (train, test) row indices for one fold, in row order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_of.len()).partition(|&i| self.fold_of[i] != fold)
    }
}

/// Shuffles each class by `seed` and deals its rows round-robin over the
/// folds. The dealing position carries over from one class to the next so
/// fold sizes also stay within one of each other.
///
/// Every class needs at least `k` rows, except for leave-one-out
/// (`k` equal to the number of rows).
pub fn stratified_folds(labels: &[Class], k: usize, seed: u64) -> Result<FoldAssignment> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} rows")));
    }
    let mut rng = rng_from_seed(seed);
    let mut fold_of = vec![0; n];
    let mut next = 0;
    for class in Class::ORDER {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if k != n && !members.is_empty() && members.len() < k {
            return Err(Error::invalid(format!(
                "class {class} has {} rows, fewer than k = {k}; use a smaller k",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    #[default]
    None,
    /// Spread-subsample the whole dataset, then assign folds.
    BeforeFolds,
    /// Spread-subsample each training split.
    InsideFolds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    #[default]
    None,
    /// Select once on the whole (possibly balanced) dataset.
    Outside,
    /// Select on each training split.
    Inside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub k: usize,
    pub seed: u64,
    pub balance: Balance,
    pub selection: SelectionMode,
    pub termination: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            k: 10,
            seed: 0,
            balance: Balance::None,
            selection: SelectionMode::None,
            termination: DEFAULT_TERMINATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub matrix: ConfusionMatrix,
    pub accuracy: f64,
    pub kappa: f64,
    pub model_digest: String,
    pub selected_features: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowPrediction {
    pub session_id: String,
    pub fold: usize,
    pub actual: Class,
    pub predicted: Class,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub feature_set: String,
    pub learner: String,
    pub accuracy: f64,
    pub kappa: f64,
    pub chance_accuracy: f64,
    pub aggregate: ConfusionMatrix,
    pub per_fold: Vec<FoldResult>,
    pub predictions: Vec<RowPrediction>,
    pub selected_features: Option<Vec<String>>,
    pub config_echo: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl EvalReport {
    /// Tab-separated `set, learner, accuracy, kappa, chance`.
    pub fn summary_row(&self) -> String {
        format!(
            "{}\t{}\t{:.3}\t{:.3}\t{:.3}",
            self.feature_set, self.learner, self.accuracy, self.kappa, self.chance_accuracy
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "feature set: {}", self.feature_set);
        let _ = writeln!(s, "learner:     {}", self.learner);
        let _ = writeln!(s, "accuracy:    {:.4}", self.accuracy);
        let _ = writeln!(s, "kappa:       {:.4}", self.kappa);
        let _ = writeln!(s, "chance:      {:.4}", self.chance_accuracy);
        let c = &self.aggregate.counts;
        let _ = writeln!(
            s,
            "confusion (rows actual, cols predicted; novice, expert):"
        );
        let _ = writeln!(s, "  {:>6} {:>6}", c[0][0], c[0][1]);
        let _ = writeln!(s, "  {:>6} {:>6}", c[1][0], c[1][1]);
        if let Some(sel) = &self.selected_features {
            let _ = writeln!(s, "selected:    {}", sel.join(", "));
        }
        for f in &self.per_fold {
            let _ = writeln!(
                s,
                "  fold {:>2}: accuracy {:.4} kappa {:.4}",
                f.fold, f.accuracy, f.kappa
            );
        }
        for (k, v) in &self.config_echo {
            let _ = writeln!(s, "# {k}={v}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

pub const SELECTION_LEAKAGE_NOTE: &str =
    "feature selection ran on the full dataset before the folds were split; held-out rows influenced the selected features";
pub const BALANCE_BEFORE_FOLDS_NOTE: &str =
    "dataset was balanced by spread subsampling before fold assignment";

fn learner_name(spec: &LearnerSpec) -> String {
    spec.kind().to_string()
}

fn set_columns(d: &Dataset, set: &FeatureSetId) -> Result<Dataset> {
    if let FeatureSetId::Selected(list) = set {
        if list.is_empty() {
            return Err(Error::invalid("Selected feature set has no members"));
        }
    }
    d.select_features(&set.members())
}

fn select(d: &Dataset, termination: usize) -> Result<(Dataset, Vec<String>)> {
    let r = best_first_select(d, termination)?;
    Ok((d.select_columns(&r.selected_indices), r.selected))
}

fn echo(spec: &LearnerSpec, set: &FeatureSetId, opts: &EvalOptions) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert(
        "learner".into(),
        serde_json::to_string(spec).expect("spec serializes"),
    );
    m.insert("feature_set".into(), set.to_string());
    m.insert("k".into(), opts.k.to_string());
    m.insert("seed".into(), opts.seed.to_string());
    m.insert(
        "balance".into(),
        format!("{:?}", opts.balance).to_lowercase(),
    );
    m.insert(
        "selection".into(),
        format!("{:?}", opts.selection).to_lowercase(),
    );
    m.insert("termination".into(), opts.termination.to_string());
    m
}

const STREAM_BALANCE: u64 = 1;
const STREAM_FOLDS: u64 = 2;
const STREAM_FOLD_BALANCE: u64 = 1_000;
const STREAM_FOLD_MODEL: u64 = 2_000;

fn run_fold(
    d: &Dataset,
    folds: &FoldAssignment,
    fold: usize,
    spec: &LearnerSpec,
    opts: &EvalOptions,
) -> Result<(FoldResult, Vec<RowPrediction>)> {
    let (train_idx, test_idx) = folds.split(fold);
    let mut train = d.subset(&train_idx);
    let mut test = d.subset(&test_idx);
    if opts.balance == Balance::InsideFolds {
        train = spread_subsample(
            &train,
            derive_seed(opts.seed, STREAM_FOLD_BALANCE + fold as u64),
        )?;
    }
    let mut selected = None;
    if opts.selection == SelectionMode::Inside {
        let (t, names) = select(&train, opts.termination)?;
        test = test.select_named(&names)?;
        train = t;
        selected = Some(names);
    }
    let spec = spec.reseeded(derive_seed(opts.seed, STREAM_FOLD_MODEL + fold as u64));
    let model = train_model(&spec, &train)?;
    let preds = model.predict_dataset(&test)?;
    let predicted: Vec<Class> = preds.iter().map(|p| p.label).collect();
    let matrix = ConfusionMatrix::from_pairs(&test.labels, &predicted);
    let rows = test_idx
        .iter()
        .zip(&preds)
        .map(|(&i, p)| RowPrediction {
            session_id: d.ids[i].clone(),
            fold,
            actual: d.labels[i],
            predicted: p.label,
            score: p.score,
        })
        .collect();
    Ok((
        FoldResult {
            fold,
            accuracy: matrix.accuracy()?,
            kappa: matrix.kappa()?,
            matrix,
            model_digest: model_digest(&model),
            selected_features: selected,
        },
        rows,
    ))
}

/// Stratified k-fold cross-validation of one learner on one feature set.
///
/// Balancing and feature selection run where `opts` places them. Every
/// model is trained on its training split only; fold models are seeded
/// from `opts.seed` and the fold index.
pub fn cross_validate(
    dataset: &Dataset,
    spec: &LearnerSpec,
    set: &FeatureSetId,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let mut d = set_columns(dataset, set)?;
    let mut notes = Vec::new();
    if opts.balance == Balance::BeforeFolds {
        d = spread_subsample(&d, derive_seed(opts.seed, STREAM_BALANCE))?;
        notes.push(BALANCE_BEFORE_FOLDS_NOTE.to_string());
    }
    let mut selected = None;
    if opts.selection == SelectionMode::Outside {
        let (s, names) = select(&d, opts.termination)?;
        d = s;
        selected = Some(names);
        notes.push(SELECTION_LEAKAGE_NOTE.to_string());
    }
    let folds = stratified_folds(&d.labels, opts.k, derive_seed(opts.seed, STREAM_FOLDS))?;
    run_folds(d, &folds, spec, set, opts, selected, notes)
}

/// Cross-validation over a caller-supplied fold assignment, one entry per
/// row of `dataset`. Balancing before the folds is refused because it
/// would drop rows the assignment refers to.
pub fn cross_validate_with_folds(
    dataset: &Dataset,
    folds: &FoldAssignment,
    spec: &LearnerSpec,
    set: &FeatureSetId,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if opts.balance == Balance::BeforeFolds {
        return Err(Error::invalid(
            "balancing before the folds needs the folds to be assigned afterwards",
        ));
    }
    if folds.fold_of.len() != dataset.len() {
        return Err(Error::invalid(format!(
            "fold assignment covers {} rows, dataset has {}",
            folds.fold_of.len(),
            dataset.len()
        )));
    }
    if folds.k < 2 || folds.fold_of.iter().any(|&f| f >= folds.k) {
        return Err(Error::invalid("fold indices must lie in 0..k with k >= 2"));
    }
    let mut d = set_columns(dataset, set)?;
    let mut notes = Vec::new();
    let mut selected = None;
    if opts.selection == SelectionMode::Outside {
        let (s, names) = select(&d, opts.termination)?;
        d = s;
        selected = Some(names);
        notes.push(SELECTION_LEAKAGE_NOTE.to_string());
    }
    let opts = EvalOptions {
        k: folds.k,
        ..opts.clone()
    };
    run_folds(d, folds, spec, set, &opts, selected, notes)
}

fn run_folds(
    d: Dataset,
    folds: &FoldAssignment,
    spec: &LearnerSpec,
    set: &FeatureSetId,
    opts: &EvalOptions,
    selected: Option<Vec<String>>,
    notes: Vec<String>,
) -> Result<EvalReport> {
    let results = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            run_fold(&d, folds, f, spec, opts).map_err(|e| Error::Fold {
                fold: f,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut aggregate = ConfusionMatrix::default();
    let mut per_fold = Vec::with_capacity(folds.k);
    let mut predictions = Vec::with_capacity(d.len());
    for (fold, rows) in results {
        aggregate.merge(&fold.matrix);
        per_fold.push(fold);
        predictions.extend(rows);
    }
    let order: BTreeMap<&str, usize> = d
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    predictions.sort_by_key(|p| order[p.session_id.as_str()]);

    Ok(EvalReport {
        feature_set: set.name().to_string(),
        learner: learner_name(spec),
        accuracy: aggregate.accuracy()?,
        kappa: aggregate.kappa()?,
        chance_accuracy: chance_accuracy(&d.labels)?,
        aggregate,
        per_fold,
        predictions,
        selected_features: selected,
        config_echo: echo(spec, set, opts),
        notes,
    })
}

/// Trains once on `train` and evaluates once on `test`. Balancing and
/// selection, when enabled, apply to the training corpus only.
pub fn cross_corpus_eval(
    train: &Dataset,
    test: &Dataset,
    spec: &LearnerSpec,
    set: &FeatureSetId,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if train.feature_names != test.feature_names {
        return Err(Error::invalid("train and test feature schemas differ"));
    }
    if test.is_empty() {
        return Err(Error::invalid("test corpus is empty"));
    }
    let mut tr = set_columns(train, set)?;
    let mut te = set_columns(test, set)?;
    if opts.balance != Balance::None {
        tr = spread_subsample(&tr, derive_seed(opts.seed, STREAM_BALANCE))?;
    }
    let mut selected = None;
    if opts.selection != SelectionMode::None {
        let (s, names) = select(&tr, opts.termination)?;
        te = te.select_named(&names)?;
        tr = s;
        selected = Some(names);
    }
    let spec_seeded = spec.reseeded(derive_seed(opts.seed, STREAM_FOLD_MODEL));
    let model = train_model(&spec_seeded, &tr)?;
    let preds = model.predict_dataset(&te)?;
    let predicted: Vec<Class> = preds.iter().map(|p| p.label).collect();
    let matrix = ConfusionMatrix::from_pairs(&te.labels, &predicted);
    let predictions = te
        .ids
        .iter()
        .zip(&te.labels)
        .zip(&preds)
        .map(|((id, a), p)| RowPrediction {
            session_id: id.clone(),
            fold: 0,
            actual: *a,
            predicted: p.label,
            score: p.score,
        })
        .collect();
    let mut config_echo = echo(spec, set, opts);
    config_echo.insert("protocol".into(), "cross-corpus".into());
    config_echo.remove("k");
    Ok(EvalReport {
        feature_set: set.name().to_string(),
        learner: learner_name(spec),
        accuracy: matrix.accuracy()?,
        kappa: matrix.kappa()?,
        chance_accuracy: chance_accuracy(&te.labels)?,
        aggregate: matrix,
        per_fold: vec![FoldResult {
            fold: 0,
            matrix,
            accuracy: matrix.accuracy()?,
            kappa: matrix.kappa()?,
            model_digest: model_digest(&model),
            selected_features: selected.clone(),
        }],
        predictions,
        selected_features: selected,
        config_echo,
        notes: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnPrediction {
    pub turn: usize,
    pub label: Class,
    pub score: f64,
    /// Mean score over turns `1..=turn`.
    pub accumulated_score: f64,
    pub accumulated_label: Class,
}

/// Predicts after every exchange of `session`, re-extracting features on
/// each prefix. The accumulated label compares the mean score so far with
/// the model's threshold; ties go to Novice.
pub fn classify_incremental(
    model: &TrainedModel,
    session: &Session,
    config: &ExtractionConfig,
) -> Result<Vec<TurnPrediction>> {
    config.validate()?;
    if session.exchanges.is_empty() {
        return Err(Error::invalid("session has no exchanges"));
    }
    let features: Vec<FeatureId> = model
        .feature_names()
        .iter()
        .map(|n| n.parse())
        .collect::<Result<_>>()?;
    let threshold = model.score_threshold();
    let mut total = 0.0;
    let mut out = Vec::with_capacity(session.exchanges.len());
    for t in 1..=session.exchanges.len() {
        let v = extract_unchecked(&session.prefix(t), config);
        let row: Vec<Option<f64>> = features.iter().map(|f| v.get(*f)).collect();
        let p = model.predict(&row)?;
        total += p.score;
        let acc = total / t as f64;
        out.push(TurnPrediction {
            turn: t,
            label: p.label,
            score: p.score,
            accumulated_score: acc,
            accumulated_label: if acc > threshold {
                Class::Expert
            } else {
                Class::Novice
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::ForestConfig;
    use crate::svm::SmoConfig;

    #[test]
    fn metric_fixtures() {
        let cm = ConfusionMatrix::new([[40, 10], [20, 30]]);
        assert!((cm.accuracy().unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(cm.kappa().unwrap(), 0.4);
        let perfect = ConfusionMatrix::new([[5, 0], [0, 5]]);
        assert_eq!(perfect.kappa().unwrap(), 1.0);
        let majority = ConfusionMatrix::new([[741, 0], [259, 0]]);
        assert!((majority.accuracy().unwrap() - 0.741).abs() < 1e-12);
        assert_eq!(majority.kappa().unwrap(), 0.0);
        assert_eq!(ConfusionMatrix::new([[7, 0], [0, 0]]).kappa().unwrap(), 1.0);
        assert_eq!(ConfusionMatrix::new([[0, 7], [0, 0]]).kappa().unwrap(), 0.0);
        assert!(ConfusionMatrix::default().accuracy().is_err());
    }

    #[test]
    fn chance_fixtures() {
        let mk = |n: usize, e: usize| {
            let mut v = vec![Class::Novice; n];
            v.extend(vec![Class::Expert; e]);
            v
        };
        assert!((chance_accuracy(&mk(235, 80)).unwrap() - 235.0 / 315.0).abs() < 1e-15);
        assert_eq!(chance_accuracy(&mk(80, 80)).unwrap(), 0.5);
        assert!((chance_accuracy(&mk(25, 31)).unwrap() - 31.0 / 56.0).abs() < 1e-15);
        assert!(chance_accuracy(&[]).is_err());
    }

    #[test]
    fn fold_dealing() {
        let mut labels = vec![Class::Novice; 80];
        labels.extend(vec![Class::Expert; 80]);
        let f = stratified_folds(&labels, 10, 4).unwrap();
        for fold in 0..10 {
            for c in Class::ORDER {
                let k = (0..160)
                    .filter(|&i| f.fold_of[i] == fold && labels[i] == c)
                    .count();
                assert_eq!(k, 8);
            }
        }
        assert_eq!(f, stratified_folds(&labels, 10, 4).unwrap());
        assert!(stratified_folds(&labels, 1, 0).is_err());
        assert!(stratified_folds(&labels[..85], 10, 0).is_err());
        let loo = stratified_folds(&labels[75..95], 20, 0).unwrap();
        let mut seen = loo.fold_of.clone();
        seen.sort();
        assert_eq!(seen, (0..20).collect::<Vec<_>>());
    }

    fn separable(n: usize) -> Dataset {
        let rows = (0..n)
            .map(|i| {
                let gap = if i < n / 2 { 0.0 } else { 100.0 };
                vec![Some(i as f64 + gap), Some(((i * 37) % 11) as f64)]
            })
            .collect();
        let labels = (0..n)
            .map(|i| {
                if i < n / 2 {
                    Class::Novice
                } else {
                    Class::Expert
                }
            })
            .collect();
        Dataset::new(
            vec!["barge_in_count".into(), "help_request_count".into()],
            rows,
            labels,
            (0..n).map(|i| format!("r{i}")).collect(),
        )
        .unwrap()
    }

    fn sel(names: &[&str]) -> FeatureSetId {
        FeatureSetId::Selected(names.iter().map(|n| n.parse().unwrap()).collect())
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let d = separable(40);
        let set = sel(&["barge_in_count"]);
        for spec in [
            LearnerSpec::Forest(ForestConfig {
                n_trees: 15,
                ..Default::default()
            }),
            LearnerSpec::Svm(SmoConfig::default()),
        ] {
            let r = cross_validate(&d, &spec, &set, &EvalOptions::default()).unwrap();
            assert_eq!(r.accuracy, 1.0);
            assert_eq!(r.kappa, 1.0);
            assert_eq!(r.per_fold.len(), 10);
            assert_eq!(r.aggregate.total(), 40);
            assert_eq!(
                r,
                cross_validate(&d, &spec, &set, &EvalOptions::default()).unwrap()
            );
        }
    }

    #[test]
    fn selection_outside_is_flagged() {
        let d = separable(40);
        let opts = EvalOptions {
            selection: SelectionMode::Outside,
            ..Default::default()
        };
        let spec = LearnerSpec::Svm(SmoConfig::default());
        let set = sel(&["barge_in_count", "help_request_count"]);
        let r = cross_validate(&d, &spec, &set, &opts).unwrap();
        assert!(r.notes.iter().any(|n| n == SELECTION_LEAKAGE_NOTE));
        assert_eq!(
            r.selected_features.as_deref(),
            Some(&["barge_in_count".to_string()][..])
        );
    }

    #[test]
    fn cross_corpus_contract() {
        let d = separable(20);
        let spec = LearnerSpec::Svm(SmoConfig::default());
        let set = sel(&["barge_in_count"]);
        let r = cross_corpus_eval(&d, &d, &spec, &set, &EvalOptions::default()).unwrap();
        assert_eq!(r.chance_accuracy, 0.5);
        assert!(
            cross_corpus_eval(&d, &d.subset(&[]), &spec, &set, &EvalOptions::default()).is_err()
        );
        let other = d.select_columns(&[0]);
        assert!(cross_corpus_eval(&d, &other, &spec, &set, &EvalOptions::default()).is_err());
    }

    #[test]
    fn fold_errors_name_the_fold() {
        // one expert row lands in a single fold; every other training split is single-class
        let mut d = separable(12);
        for l in d.labels.iter_mut().skip(1) {
            *l = Class::Novice;
        }
        d.labels[0] = Class::Expert;
        let spec = LearnerSpec::Svm(SmoConfig::default());
        let opts = EvalOptions {
            k: 12,
            ..Default::default()
        };
        match cross_validate(&d, &spec, &sel(&["barge_in_count"]), &opts) {
            Err(Error::Fold { .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}

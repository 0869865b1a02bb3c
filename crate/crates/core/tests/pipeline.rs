use std::collections::BTreeMap;

use expertise_core::corpus::{load_corpus, write_corpus};
use expertise_core::eval::{
    classify_incremental, cross_validate, Balance, EvalOptions, SelectionMode,
};
use expertise_core::features::{extract_features, ExtractionConfig, FeatureId, FeatureSetId};
use expertise_core::forest::ForestConfig;
use expertise_core::matrix::FeatureMatrix;
use expertise_core::model::{model_digest, train_model, LearnerSpec, ModelFile};
use expertise_core::prep::Dataset;
use expertise_core::svm::SmoConfig;
use expertise_core::synth::{generate_corpus, CorpusSize, CorpusStyle, GeneratorConfig};

fn small_corpus(seed: u64) -> expertise_core::corpus::Corpus {
    generate_corpus(&GeneratorConfig::new(
        CorpusSize::PerClass(25),
        seed,
        CorpusStyle::Lego,
    ))
    .unwrap()
}

fn forest(trees: usize) -> LearnerSpec {
    LearnerSpec::Forest(ForestConfig {
        n_trees: trees,
        ..ForestConfig::default()
    })
}

#[test]
fn corpus_survives_a_write_and_reload() {
    let corpus = small_corpus(11);
    let mut comments = BTreeMap::new();
    comments.insert("origin".to_string(), "test".to_string());
    let mut bytes = Vec::new();
    write_corpus(&corpus, &comments, &mut bytes).unwrap();
    let (back, report) = load_corpus(bytes.as_slice(), &corpus.name).unwrap();
    assert!(report.rejections.is_empty());
    assert_eq!(back.sessions, corpus.sessions);

    let mut again = Vec::new();
    write_corpus(&back, &comments, &mut again).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn matrix_round_trip_keeps_values_and_labels() {
    let cfg = ExtractionConfig::default();
    let vectors: Vec<_> = small_corpus(12)
        .sessions
        .iter()
        .filter_map(|s| extract_features(s, &cfg).ok())
        .collect();
    let m = FeatureMatrix::from_vectors(&vectors, &FeatureId::ALL);
    let mut bytes = Vec::new();
    m.write(&mut bytes).unwrap();
    let back = FeatureMatrix::read(bytes.as_slice()).unwrap();
    assert_eq!(back.to_vectors().unwrap(), vectors);
    assert_eq!(
        back.to_dataset().unwrap(),
        Dataset::from_vectors(&vectors, &FeatureId::ALL).unwrap()
    );
}

#[test]
fn generation_and_training_are_reproducible() {
    let cfg = ExtractionConfig::default();
    let build = || {
        let vectors: Vec<_> = small_corpus(13)
            .sessions
            .iter()
            .filter_map(|s| extract_features(s, &cfg).ok())
            .collect();
        let d = Dataset::from_vectors(&vectors, &FeatureId::ALL).unwrap();
        model_digest(&train_model(&forest(40).reseeded(5), &d).unwrap())
    };
    assert_eq!(build(), build());
}

#[test]
fn model_file_reload_predicts_identically() {
    let cfg = ExtractionConfig::default();
    let vectors: Vec<_> = small_corpus(14)
        .sessions
        .iter()
        .filter_map(|s| extract_features(s, &cfg).ok())
        .collect();
    let d = Dataset::from_vectors(&vectors, &FeatureSetId::Durations.members()).unwrap();
    for spec in [forest(30), LearnerSpec::Svm(SmoConfig::default())] {
        let model = train_model(&spec, &d).unwrap();
        let file = ModelFile::new(&model, "Durations", None, BTreeMap::new()).unwrap();
        let mut bytes = Vec::new();
        file.write(&mut bytes).unwrap();
        let reloaded = ModelFile::read(bytes.as_slice()).unwrap().model().unwrap();
        assert_eq!(model_digest(&reloaded), model_digest(&model));
        for row in &d.rows {
            assert_eq!(reloaded.predict(row).unwrap(), model.predict(row).unwrap());
        }
    }
}

#[test]
fn tampered_model_file_is_rejected() {
    let cfg = ExtractionConfig::default();
    let vectors: Vec<_> = small_corpus(15)
        .sessions
        .iter()
        .filter_map(|s| extract_features(s, &cfg).ok())
        .collect();
    let d = Dataset::from_vectors(&vectors, &FeatureSetId::Global.members()).unwrap();
    let model = train_model(&LearnerSpec::Svm(SmoConfig::default()), &d).unwrap();
    let file = ModelFile::new(&model, "Global", None, BTreeMap::new()).unwrap();
    let mut bytes = Vec::new();
    file.write(&mut bytes).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let pos = text.find("\"bias\"").expect("svm payload has a bias");
    let digit = pos + text[pos..].find(|c: char| c.is_ascii_digit()).unwrap();
    let mut tampered = text.into_bytes();
    tampered[digit] = if tampered[digit] == b'7' { b'3' } else { b'7' };
    assert!(ModelFile::read(tampered.as_slice())
        .and_then(|f| f.model())
        .is_err());
}

#[test]
fn cross_validation_is_deterministic_and_reports_every_row() {
    let cfg = ExtractionConfig::default();
    let vectors: Vec<_> = small_corpus(16)
        .sessions
        .iter()
        .filter_map(|s| extract_features(s, &cfg).ok())
        .collect();
    let d = Dataset::from_vectors(&vectors, &FeatureId::ALL).unwrap();
    let opts = EvalOptions {
        k: 5,
        seed: 9,
        balance: Balance::InsideFolds,
        selection: SelectionMode::Inside,
        termination: 5,
    };
    let a = cross_validate(&d, &forest(25), &FeatureSetId::All, &opts).unwrap();
    let b = cross_validate(&d, &forest(25), &FeatureSetId::All, &opts).unwrap();
    assert_eq!(a.accuracy, b.accuracy);
    assert_eq!(a.predictions, b.predictions);
    assert_eq!(a.predictions.len(), d.len());
    assert_eq!(a.per_fold.len(), 5);
    assert!(a.per_fold.iter().all(|f| f.selected_features.is_some()));
}

#[test]
fn incremental_classification_emits_one_prediction_per_turn() {
    let cfg = ExtractionConfig::default();
    let corpus = small_corpus(17);
    let vectors: Vec<_> = corpus
        .sessions
        .iter()
        .filter_map(|s| extract_features(s, &cfg).ok())
        .collect();
    let d = Dataset::from_vectors(&vectors, &FeatureId::ALL).unwrap();
    let model = train_model(&forest(30), &d).unwrap();
    let session = corpus
        .sessions
        .iter()
        .find(|s| s.exchanges.len() >= 3)
        .unwrap();
    let turns = classify_incremental(&model, session, &cfg).unwrap();
    assert_eq!(turns.len(), session.exchanges.len());
    let mut sum = 0.0;
    for (i, t) in turns.iter().enumerate() {
        assert_eq!(t.turn, i + 1);
        sum += t.score;
        assert!((t.accumulated_score - sum / (i + 1) as f64).abs() < 1e-12);
    }
}

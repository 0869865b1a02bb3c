use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::warn;
use serde::Serialize;
use serde_json::{json, Value};

use expertise_core::corpus::{
    load_corpus, parse_session_record, write_corpus, Class, Corpus, Label, Session,
};
use expertise_core::eval::{
    classify_incremental, cross_corpus_eval, cross_validate, ConfusionMatrix, EvalOptions,
    EvalReport, SelectionMode,
};
use expertise_core::features::{
    extract_features, ExtractionConfig, FeatureId, FeatureSetId, FeatureVector,
};
use expertise_core::forest::ForestConfig;
use expertise_core::matrix::FeatureMatrix;
use expertise_core::model::{model_digest, train_model, LearnerSpec, ModelFile, TrainedModel};
use expertise_core::prep::{best_first_select, spread_subsample, Dataset};
use expertise_core::seed::derive_seed;
use expertise_core::svm::SmoConfig;
use expertise_core::synth::{generate_corpus, CorpusSize, CorpusStyle, GeneratorConfig, Profiles};

use crate::{
    ClassifyArgs, Cli, Command, EvaluateArgs, ExtractArgs, ExtractionArgs, Format, GenerateArgs,
    LearnerArg, LearnerArgs, MonitorArgs, SelectArgs, StyleArg, TrainArgs, OUT_DIR_ENV,
};

/// Seed streams shared with the library's cross-corpus evaluation, so that
/// `train` followed by `classify` reproduces `evaluate --train --test`.
const STREAM_BALANCE: u64 = 1;
const STREAM_MODEL: u64 = 2_000;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Extract(a) => extract(cli, a),
        Command::SelectFeatures(a) => select_features(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Classify(a) => classify(cli, a),
        Command::Monitor(a) => monitor(cli, a),
    }
}

/// Relative output paths land under `$EXPERTISE_OUT_DIR` when it is set.
fn output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn create(path: &Path) -> Result<(PathBuf, BufWriter<File>)> {
    let path = output_path(path);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

/// Prints `text` and, when requested, writes the same bytes to `out`.
fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout
        .write_all(text.as_bytes())
        .and_then(|()| stdout.flush())
    {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
        other => other.context("writing to stdout")?,
    }
    if let Some(p) = out {
        let (path, mut w) = create(p)?;
        w.write_all(text.as_bytes())?;
        w.flush()
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn json_text(value: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn flatten_into(prefix: &str, value: &Value, out: &mut BTreeMap<String, String>) {
    match value {
        Value::Null => {}
        Value::Object(map) => {
            for (k, v) in map {
                flatten_into(&format!("{prefix}.{k}"), v, out);
            }
        }
        Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

/// The resolved command line as `cli.*` keys.
fn cli_echo(cli: &Cli, command: &str, args: &impl Serialize) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("cli.command".into(), command.into());
    m.insert("cli.seed".into(), cli.seed.to_string());
    flatten_into(
        "cli",
        &serde_json::to_value(args).expect("arguments serialize"),
        &mut m,
    );
    m
}

fn extraction_config(a: &ExtractionArgs) -> Result<ExtractionConfig> {
    let cfg = ExtractionConfig {
        default_first_prompt_duration: a.prompt_duration,
        help_keywords: a
            .help_keywords
            .split(',')
            .map(|k| k.trim().to_string())
            .filter(|k| !k.is_empty())
            .collect(),
        help_dtmf_key: a.help_dtmf_key.clone(),
        phone_estimator_enabled: a.estimate_phones,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn read_corpus(path: &Path) -> Result<(Corpus, Vec<String>)> {
    let name = path
        .file_stem()
        .map_or_else(|| "corpus".into(), |s| s.to_string_lossy().into_owned());
    let (corpus, report) =
        load_corpus(open(path)?, &name).with_context(|| format!("reading {}", path.display()))?;
    for r in &report.rejections {
        warn!(
            "{}: line {}: record skipped: {}",
            path.display(),
            r.line,
            r.reason
        );
    }
    Ok((corpus, report.comments))
}

/// Sessions from a log file, or from a file of bare session records.
fn read_sessions(path: &Path) -> Result<Vec<Session>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.trim_start().starts_with('#') {
        return Ok(read_corpus(path)?.0.sessions);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_session_record(l)
                .map(|r| r.session)
                .with_context(|| format!("{} line {}", path.display(), i + 1))
        })
        .collect()
}

fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    FeatureMatrix::read(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Labeled rows of a matrix; unlabeled rows are dropped with a warning.
fn labeled_dataset(m: &FeatureMatrix, path: &Path) -> Result<Dataset> {
    let keep: Vec<usize> = (0..m.len())
        .filter(|&i| m.labels[i].class().is_some())
        .collect();
    if keep.len() < m.len() {
        warn!(
            "{}: ignoring {} unlabeled rows",
            path.display(),
            m.len() - keep.len()
        );
    }
    let sub = FeatureMatrix {
        feature_names: m.feature_names.clone(),
        ids: keep.iter().map(|&i| m.ids[i].clone()).collect(),
        labels: keep.iter().map(|&i| m.labels[i]).collect(),
        rows: keep.iter().map(|&i| m.rows[i].clone()).collect(),
        comments: BTreeMap::new(),
    };
    Ok(sub.to_dataset()?)
}

fn prefixed(prefix: &str, m: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    m.iter()
        .map(|(k, v)| (format!("{prefix}.{k}"), v.clone()))
        .collect()
}

/// A feature-set argument: a fixed or explicit set, or selection over All.
#[derive(Debug, Clone, PartialEq)]
enum SetChoice {
    Fixed(FeatureSetId),
    SelectFromAll,
}

impl SetChoice {
    fn parse(s: &str) -> Result<SetChoice> {
        if s.trim().eq_ignore_ascii_case("selected") {
            return Ok(SetChoice::SelectFromAll);
        }
        Ok(SetChoice::Fixed(s.trim().parse()?))
    }

    fn base(&self) -> FeatureSetId {
        match self {
            SetChoice::Fixed(s) => s.clone(),
            SetChoice::SelectFromAll => FeatureSetId::All,
        }
    }
}

fn set_label(set: &FeatureSetId) -> String {
    match set {
        FeatureSetId::Selected(list) => {
            let names: Vec<&str> = list.iter().map(|f| f.name()).collect();
            format!("selected:{}", names.join(","))
        }
        other => other.name().to_string(),
    }
}

fn learner_spec(a: &LearnerArgs) -> LearnerSpec {
    match a.learner {
        LearnerArg::Forest => LearnerSpec::Forest(ForestConfig {
            n_trees: a.trees,
            mtry: a.mtry,
            max_depth: a.max_depth,
            min_samples_leaf: a.min_leaf,
            master_seed: 0,
        }),
        LearnerArg::Svm => LearnerSpec::Svm(SmoConfig {
            c: a.c,
            kkt_tolerance: a.tolerance,
            max_iterations: a.max_iterations,
            ..SmoConfig::default()
        }),
    }
}

fn label_name(c: Class) -> &'static str {
    Label::from(c).as_str()
}

// ------------------------------------------------------------------ generate

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let style = match a.style {
        StyleArg::Lego => CorpusStyle::Lego,
        StyleArg::Lg2014 => CorpusStyle::Lg2014,
    };
    let size = match (a.per_class, a.total) {
        (Some(n), _) => CorpusSize::PerClass(n),
        (None, Some(t)) => CorpusSize::Priors(t),
        (None, None) => bail!("one of --per-class or --total is required"),
    };
    let mut cfg = GeneratorConfig::new(size, cli.seed, style);
    if let Some(name) = &a.name {
        cfg.name = name.clone();
    }
    if let Some(p) = &a.profiles {
        cfg.profiles =
            Profiles::from_json(open(p)?).with_context(|| format!("reading {}", p.display()))?;
    }
    let corpus = generate_corpus(&cfg)?;
    let mut comments = cfg.echo();
    comments.extend(cli_echo(cli, "generate", a));
    let (path, mut w) = create(&a.out)?;
    write_corpus(&corpus, &comments, &mut w)?;
    w.flush()?;

    let counts = cfg.class_counts()?;
    let summary = json!({
        "corpus": corpus.name,
        "path": path.display().to_string(),
        "sessions": corpus.sessions.len(),
        "novice": counts[0],
        "expert": counts[1],
    });
    let text = match cli.format {
        Format::Json => json_text(&summary)?,
        Format::Text => format!(
            "wrote {} sessions ({} novice, {} expert) to {}\n",
            corpus.sessions.len(),
            counts[0],
            counts[1],
            path.display()
        ),
    };
    emit(&text, None)
}

// ------------------------------------------------------------------ extract

fn extract(cli: &Cli, a: &ExtractArgs) -> Result<()> {
    let cfg = extraction_config(&a.extraction)?;
    let (corpus, corpus_comments) = read_corpus(&a.corpus)?;
    let mut vectors: Vec<FeatureVector> = Vec::with_capacity(corpus.sessions.len());
    let mut skipped = 0usize;
    for s in &corpus.sessions {
        match extract_features(s, &cfg) {
            Ok(v) => vectors.push(v),
            Err(e) => {
                skipped += 1;
                warn!("{e}; session left out of the matrix");
            }
        }
    }
    if vectors.is_empty() {
        bail!("no session of {} yields features", a.corpus.display());
    }
    let mut m = FeatureMatrix::from_vectors(&vectors, &FeatureId::ALL);
    for c in &corpus_comments {
        if let Some((k, v)) = c.split_once('=') {
            m.comments
                .insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    m.comments.insert("corpus".into(), corpus.name.clone());
    m.comments
        .insert("extract.skipped_sessions".into(), skipped.to_string());
    flatten_into("extract", &serde_json::to_value(&cfg)?, &mut m.comments);
    m.comments.extend(cli_echo(cli, "extract", a));
    let (path, mut w) = create(&a.out)?;
    m.write(&mut w)?;
    w.flush()?;

    let text = match cli.format {
        Format::Json => json_text(&json!({
            "path": path.display().to_string(),
            "rows": m.len(),
            "skipped_sessions": skipped,
        }))?,
        Format::Text => format!(
            "wrote {} rows to {} ({} sessions without user speech skipped)\n",
            m.len(),
            path.display(),
            skipped
        ),
    };
    emit(&text, None)
}

// ------------------------------------------------------------------ select-features

fn select_features(cli: &Cli, a: &SelectArgs) -> Result<()> {
    let m = read_matrix(&a.matrix)?;
    let set = match SetChoice::parse(&a.set)? {
        SetChoice::Fixed(s) => s,
        SetChoice::SelectFromAll => FeatureSetId::All,
    };
    let mut d = labeled_dataset(&m, &a.matrix)?.select_features(&set.members())?;
    if a.balance {
        d = spread_subsample(&d, derive_seed(cli.seed, STREAM_BALANCE))?;
    }
    let result = best_first_select(&d, a.termination)?;
    let mut config = prefixed("source", &m.comments);
    config.extend(cli_echo(cli, "select-features", a));
    let text = match cli.format {
        Format::Json => json_text(&json!({ "selection": result, "config": config }))?,
        Format::Text => {
            let mut s = String::new();
            writeln!(
                s,
                "searched:  {} ({} features, {} rows)",
                set.name(),
                d.n_features(),
                d.len()
            )?;
            writeln!(s, "selected:  {}", result.selected.join(", "))?;
            writeln!(s, "merit:     {:.6}", result.merit)?;
            writeln!(
                s,
                "evaluated: {} subsets, {} expansions",
                result.search_trace.len(),
                result.expansions.len()
            )?;
            for (k, v) in &config {
                writeln!(s, "# {k}={v}")?;
            }
            s
        }
    };
    emit(&text, a.out.as_deref())
}

// ------------------------------------------------------------------ train

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let m = read_matrix(&a.matrix)?;
    let choice = SetChoice::parse(&a.set)?;
    let mut d = labeled_dataset(&m, &a.matrix)?.select_features(&choice.base().members())?;
    if a.balance {
        d = spread_subsample(&d, derive_seed(cli.seed, STREAM_BALANCE))?;
    }
    let mut selection = None;
    let mut set = choice.base();
    if choice == SetChoice::SelectFromAll {
        let r = best_first_select(&d, a.termination)?;
        d = d.select_columns(&r.selected_indices);
        set = FeatureSetId::Selected(
            r.selected
                .iter()
                .map(|n| n.parse())
                .collect::<Result<_, _>>()?,
        );
        selection = Some(r);
    }
    let spec = learner_spec(&a.learner).reseeded(derive_seed(cli.seed, STREAM_MODEL));
    let model = train_model(&spec, &d)?;
    let counts = d.class_counts();
    let mut echo = prefixed("source", &m.comments);
    echo.extend(cli_echo(cli, "train", a));
    echo.insert("train.learner".into(), serde_json::to_string(&spec)?);
    echo.insert("train.rows".into(), d.len().to_string());
    echo.insert("train.novice".into(), counts[0].to_string());
    echo.insert("train.expert".into(), counts[1].to_string());
    let file = ModelFile::new(&model, &set_label(&set), selection, echo)?;
    let (path, mut w) = create(&a.out)?;
    file.write(&mut w)?;
    w.flush()?;

    let text = match cli.format {
        Format::Json => json_text(&json!({
            "path": path.display().to_string(),
            "kind": file.kind,
            "feature_set": file.feature_set,
            "features": file.feature_schema,
            "rows": d.len(),
            "digest": file.digest,
        }))?,
        Format::Text => format!(
            "trained {} on {} rows ({} novice, {} expert), features [{}]\nwrote {} (digest {})\n",
            file.kind,
            d.len(),
            counts[0],
            counts[1],
            file.feature_schema.join(", "),
            path.display(),
            file.digest
        ),
    };
    emit(&text, None)
}

// ------------------------------------------------------------------ evaluate

fn parse_sets(s: &str) -> Result<Vec<SetChoice>> {
    if s.trim().eq_ignore_ascii_case("all-sets") {
        let mut v: Vec<SetChoice> = FeatureSetId::FIXED
            .iter()
            .cloned()
            .map(SetChoice::Fixed)
            .collect();
        v.push(SetChoice::SelectFromAll);
        return Ok(v);
    }
    let v = s
        .split(';')
        .flat_map(|part| {
            // `selected:a,b` keeps its commas; other entries are comma lists
            if part.trim().starts_with("selected:") {
                vec![part.to_string()]
            } else {
                part.split(',').map(str::to_string).collect()
            }
        })
        .filter(|p| !p.trim().is_empty())
        .map(|p| SetChoice::parse(&p))
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        bail!("--sets names no feature set");
    }
    Ok(v)
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let sets = parse_sets(&a.sets)?;
    let spec = learner_spec(&a.learner);
    let base = EvalOptions {
        k: a.k,
        seed: cli.seed,
        balance: a.balance.into(),
        selection: SelectionMode::None,
        termination: a.termination,
    };
    let mut config = BTreeMap::new();
    let mut reports: Vec<EvalReport> = Vec::with_capacity(sets.len());
    match (&a.matrix, &a.train, &a.test) {
        (Some(path), _, _) => {
            let m = read_matrix(path)?;
            config.extend(prefixed("source", &m.comments));
            let d = labeled_dataset(&m, path)?;
            for choice in &sets {
                let opts = match choice {
                    SetChoice::Fixed(_) => base.clone(),
                    SetChoice::SelectFromAll => EvalOptions {
                        selection: a.selection.into(),
                        ..base.clone()
                    },
                };
                let mut r = cross_validate(&d, &spec, &choice.base(), &opts)
                    .with_context(|| format!("evaluating {}", choice.base().name()))?;
                if *choice == SetChoice::SelectFromAll {
                    r.feature_set = "Selected".into();
                }
                reports.push(r);
            }
        }
        (None, Some(train_path), Some(test_path)) => {
            let (mt, ms) = (read_matrix(train_path)?, read_matrix(test_path)?);
            config.extend(prefixed("train_source", &mt.comments));
            config.extend(prefixed("test_source", &ms.comments));
            let (train, test) = (
                labeled_dataset(&mt, train_path)?,
                labeled_dataset(&ms, test_path)?,
            );
            if a.balance == crate::BalanceArg::Inside {
                warn!("cross-corpus evaluation has no folds; --balance inside balances the training corpus");
            }
            for choice in &sets {
                let opts = match choice {
                    SetChoice::Fixed(_) => base.clone(),
                    SetChoice::SelectFromAll => EvalOptions {
                        selection: SelectionMode::Outside,
                        ..base.clone()
                    },
                };
                let mut r = cross_corpus_eval(&train, &test, &spec, &choice.base(), &opts)
                    .with_context(|| format!("evaluating {}", choice.base().name()))?;
                if *choice == SetChoice::SelectFromAll {
                    r.feature_set = "Selected".into();
                }
                reports.push(r);
            }
        }
        _ => bail!("give --matrix, or both --train and --test"),
    }
    config.extend(cli_echo(cli, "evaluate", a));
    if !a.predictions {
        for r in &mut reports {
            r.predictions.clear();
        }
    }
    let text = match cli.format {
        Format::Json => json_text(&json!({ "reports": reports, "config": config }))?,
        Format::Text => evaluation_table(&reports, &config)?,
    };
    emit(&text, a.out.as_deref())
}

fn evaluation_table(reports: &[EvalReport], config: &BTreeMap<String, String>) -> Result<String> {
    let mut s = String::new();
    writeln!(
        s,
        "{:<14} {:<7} {:>8} {:>7} {:>7}",
        "feature set", "learner", "accuracy", "kappa", "chance"
    )?;
    for r in reports {
        writeln!(
            s,
            "{:<14} {:<7} {:>8.3} {:>7.3} {:>7.3}",
            r.feature_set, r.learner, r.accuracy, r.kappa, r.chance_accuracy
        )?;
    }
    for r in reports {
        if let Some(sel) = &r.selected_features {
            writeln!(s, "selected ({}): {}", r.feature_set, sel.join(", "))?;
        }
        for f in r
            .per_fold
            .iter()
            .filter_map(|f| f.selected_features.as_ref().map(|sel| (f.fold, sel)))
        {
            writeln!(
                s,
                "selected ({} fold {}): {}",
                r.feature_set,
                f.0,
                f.1.join(", ")
            )?;
        }
    }
    let mut notes: Vec<&String> = reports.iter().flat_map(|r| &r.notes).collect();
    notes.sort();
    notes.dedup();
    for n in notes {
        writeln!(s, "note: {n}")?;
    }
    for (k, v) in config {
        writeln!(s, "# {k}={v}")?;
    }
    Ok(s)
}

// ------------------------------------------------------------------ classify

fn read_model(path: &Path) -> Result<(ModelFile, TrainedModel)> {
    let file =
        ModelFile::read(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    let model = file.model()?;
    Ok((file, model))
}

fn model_features(model: &TrainedModel) -> Result<Vec<FeatureId>> {
    Ok(model
        .feature_names()
        .iter()
        .map(|n| n.parse())
        .collect::<Result<Vec<FeatureId>, _>>()?)
}

#[derive(Debug, Serialize)]
struct SessionPrediction {
    session_id: String,
    actual: &'static str,
    predicted: Option<&'static str>,
    score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn classify(cli: &Cli, a: &ClassifyArgs) -> Result<()> {
    let (file, model) = read_model(&a.model)?;
    let features = model_features(&model)?;
    let mut rows: Vec<(String, Label, std::result::Result<FeatureVector, String>)> = Vec::new();
    match (&a.corpus, &a.matrix) {
        (Some(path), _) => {
            let cfg = extraction_config(&a.extraction)?;
            for s in read_corpus(path)?.0.sessions {
                let v = extract_features(&s, &cfg).map_err(|e| e.to_string());
                rows.push((s.session_id.clone(), s.label, v));
            }
        }
        (None, Some(path)) => {
            for v in read_matrix(path)?.to_vectors()? {
                rows.push((v.session_id.clone(), v.label, Ok(v)));
            }
        }
        (None, None) => bail!("give --corpus or --matrix"),
    }

    let mut out = Vec::with_capacity(rows.len());
    let mut cm = ConfusionMatrix::default();
    for (id, label, v) in rows {
        let pred = v.and_then(|v| {
            let row: Vec<Option<f64>> = features.iter().map(|f| v.get(*f)).collect();
            model.predict(&row).map_err(|e| e.to_string())
        });
        match pred {
            Ok(p) => {
                if let Some(actual) = label.class() {
                    cm.add(actual, p.label);
                }
                out.push(SessionPrediction {
                    session_id: id,
                    actual: label.as_str(),
                    predicted: Some(label_name(p.label)),
                    score: Some(p.score),
                    error: None,
                });
            }
            Err(e) => {
                warn!("{id}: not classified: {e}");
                out.push(SessionPrediction {
                    session_id: id,
                    actual: label.as_str(),
                    predicted: None,
                    score: None,
                    error: Some(e),
                });
            }
        }
    }
    let mut config = prefixed("model", &file.config_echo);
    config.insert("model.digest".into(), file.digest.clone());
    config.insert("model.feature_set".into(), file.feature_set.clone());
    config.extend(cli_echo(cli, "classify", a));
    let metrics = (cm.total() > 0).then(|| {
        json!({
            "labeled": cm.total(),
            "accuracy": cm.accuracy().ok(),
            "kappa": cm.kappa().ok(),
            "confusion": cm.counts,
        })
    });
    let text = match cli.format {
        Format::Json => json_text(&json!({
            "predictions": out,
            "metrics": metrics,
            "model_digest": model_digest(&model),
            "config": config,
        }))?,
        Format::Text => {
            let mut s = String::new();
            writeln!(s, "session_id\tactual\tpredicted\tscore")?;
            for p in &out {
                match (p.predicted, p.score) {
                    (Some(l), Some(sc)) => {
                        writeln!(s, "{}\t{}\t{}\t{}", p.session_id, p.actual, l, sc)?
                    }
                    _ => writeln!(
                        s,
                        "{}\t{}\tunclassified\t{}",
                        p.session_id,
                        p.actual,
                        p.error.as_deref().unwrap_or("")
                    )?,
                }
            }
            if cm.total() > 0 {
                writeln!(
                    s,
                    "# accuracy={:.4} kappa={:.4} labeled={}",
                    cm.accuracy()?,
                    cm.kappa()?,
                    cm.total()
                )?;
            }
            for (k, v) in &config {
                writeln!(s, "# {k}={v}")?;
            }
            s
        }
    };
    emit(&text, a.out.as_deref())
}

// ------------------------------------------------------------------ monitor

fn monitor(cli: &Cli, a: &MonitorArgs) -> Result<()> {
    let (_, model) = read_model(&a.model)?;
    let cfg = extraction_config(&a.extraction)?;
    let mut sessions = read_sessions(&a.corpus)?;
    if let Some(id) = &a.session {
        sessions.retain(|s| &s.session_id == id);
        if sessions.is_empty() {
            return Err(anyhow!(
                "session `{id}` not found in {}",
                a.corpus.display()
            ));
        }
    }
    let mut s = String::new();
    for session in &sessions {
        for t in classify_incremental(&model, session, &cfg)? {
            match cli.format {
                Format::Json => writeln!(
                    s,
                    "{}",
                    json!({
                        "session_id": session.session_id,
                        "turn": t.turn,
                        "label": label_name(t.label),
                        "score": t.score,
                        "accumulated_score": t.accumulated_score,
                        "accumulated_label": label_name(t.accumulated_label),
                    })
                )?,
                Format::Text => writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    session.session_id,
                    t.turn,
                    label_name(t.label),
                    t.score,
                    t.accumulated_score,
                    label_name(t.accumulated_label)
                )?,
            }
        }
    }
    emit(&s, None)
}

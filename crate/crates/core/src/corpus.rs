//! Dialog-session data model and the line-oriented session log format.
//!
//! A log is a UTF-8 text file whose first non-blank line is the header
//! `#expertise-log v1`. Every following non-blank line that does not start
//! with `#` is one session encoded as a JSON object:
//!
//! ```text
//! #expertise-log v1
//! {"session_id":"s1","label":"expert","exchanges":[{"index":1,"system_start":0.0,"user_start":11.2,"user_end":12.9,"user_barge_in":false}]}
//! ```
//!
//! Times are seconds from call start. Optional fields are omitted when
//! absent. Further `#` lines are comments and carry the generator config echo.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};

pub const LOG_HEADER: &str = "#expertise-log v1";
const HEADER_PREFIX: &str = "#expertise-log";

/// Session annotation. Parsing is case-insensitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Label {
    Novice,
    Expert,
    #[default]
    Unlabeled,
}

/// The two trainable classes, in declared class order (Novice first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Novice,
    Expert,
}

impl Class {
    pub const ORDER: [Class; 2] = [Class::Novice, Class::Expert];

    pub fn index(self) -> usize {
        match self {
            Class::Novice => 0,
            Class::Expert => 1,
        }
    }

    pub fn from_index(i: usize) -> Class {
        if i == 0 {
            Class::Novice
        } else {
            Class::Expert
        }
    }

    pub fn other(self) -> Class {
        match self {
            Class::Novice => Class::Expert,
            Class::Expert => Class::Novice,
        }
    }
}

impl From<Class> for Label {
    fn from(c: Class) -> Label {
        match c {
            Class::Novice => Label::Novice,
            Class::Expert => Label::Expert,
        }
    }
}

impl Label {
    pub fn class(self) -> Option<Class> {
        match self {
            Label::Novice => Some(Class::Novice),
            Label::Expert => Some(Class::Expert),
            Label::Unlabeled => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Novice => "novice",
            Label::Expert => "expert",
            Label::Unlabeled => "unlabeled",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Label::from(*self).fmt(f)
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "novice" => Ok(Label::Novice),
            "expert" => Ok(Label::Expert),
            "unlabeled" | "" | "?" => Ok(Label::Unlabeled),
            other => Err(Error::invalid(format!("unknown label `{other}`"))),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Label, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One system-turn / user-turn pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exchange {
    pub index: u32,
    pub system_start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_end: Option<f64>,
    #[serde(default)]
    pub user_barge_in: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phone_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtmf: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub help_flag: Option<bool>,
}

impl Exchange {
    /// A bare exchange with only its index and system start time set.
    pub fn new(index: u32, system_start: f64) -> Exchange {
        Exchange {
            index,
            system_start,
            system_end: None,
            user_start: None,
            user_end: None,
            user_barge_in: false,
            transcript: None,
            phone_count: None,
            dtmf: None,
            help_flag: None,
        }
    }

    /// User utterance duration when both endpoints are logged.
    pub fn utterance_duration(&self) -> Option<f64> {
        match (self.user_start, self.user_end) {
            (Some(s), Some(e)) => Some(e - s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    #[serde(default)]
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_system_prompt_duration: Option<f64>,
    pub exchanges: Vec<Exchange>,
}

impl Session {
    /// True when the user never speaks. Such sessions load but cannot be
    /// turned into feature vectors.
    pub fn is_no_interaction(&self) -> bool {
        self.exchanges.iter().all(|e| e.user_start.is_none())
    }

    /// The session truncated to its first `turns` exchanges.
    pub fn prefix(&self, turns: usize) -> Session {
        Session {
            session_id: self.session_id.clone(),
            label: self.label,
            first_system_prompt_duration: self.first_system_prompt_duration,
            exchanges: self.exchanges[..turns.min(self.exchanges.len())].to_vec(),
        }
    }

    /// Checks every structural invariant, naming the first one violated.
    pub fn validate(&self) -> Result<()> {
        let fail = |invariant: String| {
            Err(Error::Validation {
                session: self.session_id.clone(),
                invariant,
            })
        };
        if self.session_id.is_empty() {
            return fail("empty session_id".into());
        }
        if self.exchanges.is_empty() {
            return fail("session has no exchanges".into());
        }
        if let Some(d) = self.first_system_prompt_duration {
            if !(d.is_finite() && d > 0.0) {
                return fail("first_system_prompt_duration must be positive".into());
            }
        }
        let mut prev_start = f64::NEG_INFINITY;
        for (i, ex) in self.exchanges.iter().enumerate() {
            if ex.index as usize != i + 1 {
                return fail(format!(
                    "non-consecutive exchange index (expected {}, found {})",
                    i + 1,
                    ex.index
                ));
            }
            let times = [
                Some(ex.system_start),
                ex.system_end,
                ex.user_start,
                ex.user_end,
            ];
            if times.iter().flatten().any(|t| !t.is_finite() || *t < 0.0) {
                return fail(format!(
                    "exchange {}: times must be finite and nonnegative",
                    ex.index
                ));
            }
            if let Some(end) = ex.system_end {
                if end < ex.system_start {
                    return fail(format!(
                        "exchange {}: system_end before system_start",
                        ex.index
                    ));
                }
            }
            if let (Some(s), Some(e)) = (ex.user_start, ex.user_end) {
                if e < s {
                    return fail(format!("exchange {}: user_end before user_start", ex.index));
                }
            }
            if ex.user_barge_in && ex.user_start.is_none() {
                return fail(format!(
                    "exchange {}: barge-in without user_start",
                    ex.index
                ));
            }
            if ex.system_start < prev_start {
                return fail(format!(
                    "exchange {}: system_start earlier than previous exchange",
                    ex.index
                ));
            }
            prev_start = ex.system_start;
        }
        Ok(())
    }
}

/// A named, ordered collection of sessions with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub name: String,
    pub sessions: Vec<Session>,
}

/// Counts per label, including `Unlabeled`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ClassDistribution {
    pub novice: usize,
    pub expert: usize,
    pub unlabeled: usize,
}

impl ClassDistribution {
    pub fn total(&self) -> usize {
        self.novice + self.expert + self.unlabeled
    }

    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Novice => self.novice,
            Label::Expert => self.expert,
            Label::Unlabeled => self.unlabeled,
        }
    }
}

pub fn class_distribution(corpus: &Corpus) -> ClassDistribution {
    let mut d = ClassDistribution::default();
    for s in &corpus.sessions {
        match s.label {
            Label::Novice => d.novice += 1,
            Label::Expert => d.expert += 1,
            Label::Unlabeled => d.unlabeled += 1,
        }
    }
    d
}

/// A successfully parsed record plus any unknown fields that were ignored.
#[derive(Debug, Clone)]
pub struct ParsedRecord {
    pub session: Session,
    pub warnings: Vec<String>,
}

const SESSION_FIELDS: [&str; 4] = [
    "session_id",
    "label",
    "first_system_prompt_duration",
    "exchanges",
];
const EXCHANGE_FIELDS: [&str; 10] = [
    "index",
    "system_start",
    "system_end",
    "user_start",
    "user_end",
    "user_barge_in",
    "transcript",
    "phone_count",
    "dtmf",
    "help_flag",
];

fn strip_unknown(
    obj: &mut serde_json::Map<String, Value>,
    known: &[&str],
    ctx: &str,
    warnings: &mut Vec<String>,
) {
    let unknown: Vec<String> = obj
        .keys()
        .filter(|k| !known.contains(&k.as_str()))
        .cloned()
        .collect();
    for k in unknown {
        warnings.push(format!("{ctx}: ignored unknown field `{k}`"));
        obj.remove(&k);
    }
}

/// Parses one serialized session (a single line of the log, without header).
pub fn parse_session_record(record: &str) -> Result<ParsedRecord> {
    parse_record_at(record, 1)
}

fn parse_record_at(record: &str, line: usize) -> Result<ParsedRecord> {
    let mut value: Value = serde_json::from_str(record).map_err(|e| Error::Parse {
        line,
        column: e.column(),
        message: e.to_string(),
    })?;
    let field_err = |message: String| Error::Parse {
        line,
        column: 0,
        message,
    };
    let mut warnings = Vec::new();
    let obj = value
        .as_object_mut()
        .ok_or_else(|| field_err("record is not an object".into()))?;
    strip_unknown(obj, &SESSION_FIELDS, "session", &mut warnings);
    if let Some(Value::Array(exchanges)) = obj.get_mut("exchanges") {
        for (i, ex) in exchanges.iter_mut().enumerate() {
            if let Some(o) = ex.as_object_mut() {
                strip_unknown(
                    o,
                    &EXCHANGE_FIELDS,
                    &format!("exchanges[{i}]"),
                    &mut warnings,
                );
            }
        }
    }
    let session: Session =
        serde_json::from_value(value).map_err(|e| field_err(format!("invalid field: {e}")))?;
    session.validate()?;
    Ok(ParsedRecord { session, warnings })
}

/// Serializes a session as one log line (no trailing newline).
pub fn serialize_session(session: &Session) -> String {
    serde_json::to_string(session).expect("session serialization is infallible")
}

/// A record dropped by [`load_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub line: usize,
    pub session_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub records: usize,
    pub accepted: usize,
    pub rejections: Vec<Rejection>,
    pub warnings: Vec<String>,
    /// Accepted sessions in which the user never speaks.
    pub no_interaction: Vec<String>,
    /// Comment lines after the header, without the leading `#`.
    pub comments: Vec<String>,
}

/// Reads a newline-delimited session log. Invalid records are skipped and
/// reported; the header line is mandatory.
pub fn load_corpus<R: BufRead>(source: R, name: &str) -> Result<(Corpus, LoadReport)> {
    let mut header_seen = false;
    let mut records: Vec<(usize, String)> = Vec::new();
    let mut report = LoadReport::default();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !header_seen {
            if trimmed.starts_with(HEADER_PREFIX) {
                if trimmed != LOG_HEADER {
                    return Err(Error::Header(trimmed.to_string()));
                }
                header_seen = true;
                continue;
            }
            return Err(Error::Header(trimmed.chars().take(40).collect()));
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            report.comments.push(comment.trim().to_string());
            continue;
        }
        records.push((i + 1, line));
    }
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let parsed: Vec<(usize, Result<ParsedRecord>)> = records
        .par_iter()
        .map(|(line, text)| (*line, parse_record_at(text, *line)))
        .collect();

    report.records = parsed.len();
    let mut seen = HashSet::new();
    let mut sessions = Vec::new();
    for (line, result) in parsed {
        match result {
            Ok(rec) => {
                let id = rec.session.session_id.clone();
                if !seen.insert(id.clone()) {
                    report.rejections.push(Rejection {
                        line,
                        session_id: Some(id),
                        reason: "duplicate session_id".into(),
                    });
                    continue;
                }
                report.warnings.extend(
                    rec.warnings
                        .into_iter()
                        .map(|w| format!("line {line}: {w}")),
                );
                if rec.session.is_no_interaction() {
                    report.no_interaction.push(id);
                }
                sessions.push(rec.session);
            }
            Err(e) => {
                let session_id = match &e {
                    Error::Validation { session, .. } => Some(session.clone()),
                    _ => None,
                };
                report.rejections.push(Rejection {
                    line,
                    session_id,
                    reason: e.to_string(),
                });
            }
        }
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    report.accepted = sessions.len();
    Ok((
        Corpus {
            name: name.to_string(),
            sessions,
        },
        report,
    ))
}

/// Writes a corpus in the log format. `comments` become `# key=value`
/// lines after the header.
pub fn write_corpus<W: Write>(
    corpus: &Corpus,
    comments: &BTreeMap<String, String>,
    mut out: W,
) -> Result<()> {
    writeln!(out, "{LOG_HEADER}")?;
    writeln!(out, "# corpus={}", corpus.name)?;
    for (k, v) in comments {
        writeln!(out, "# {k}={v}")?;
    }
    for s in &corpus.sessions {
        writeln!(out, "{}", serialize_session(s))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_exchange_record() -> &'static str {
        r#"{"session_id":"a","label":"novice","exchanges":[{"index":1,"system_start":0,"user_start":9.5,"user_end":11.0,"user_barge_in":true},{"index":2,"system_start":12.0,"user_start":14.0,"user_end":15.5}]}"#
    }

    #[test]
    fn parses_two_exchanges_with_barge_in() {
        let rec = parse_session_record(two_exchange_record()).unwrap();
        assert_eq!(rec.session.exchanges.len(), 2);
        assert!(rec.session.exchanges[0].user_barge_in);
        assert!(!rec.session.exchanges[1].user_barge_in);
        assert_eq!(rec.session.exchanges[1].system_end, None);
        assert!(rec.warnings.is_empty());
    }

    #[test]
    fn rejects_non_consecutive_index() {
        let rec = r#"{"session_id":"a","exchanges":[{"index":1,"system_start":0},{"index":3,"system_start":1}]}"#;
        let err = parse_session_record(rec).unwrap_err();
        assert!(
            err.to_string().contains("non-consecutive exchange index"),
            "{err}"
        );
    }

    #[test]
    fn label_is_case_insensitive() {
        for l in ["expert", "EXPERT", "Expert"] {
            let rec = format!(
                r#"{{"session_id":"a","label":"{l}","exchanges":[{{"index":1,"system_start":0}}]}}"#
            );
            assert_eq!(
                parse_session_record(&rec).unwrap().session.label,
                Label::Expert
            );
        }
        let rec = r#"{"session_id":"a","exchanges":[{"index":1,"system_start":0}]}"#;
        assert_eq!(
            parse_session_record(rec).unwrap().session.label,
            Label::Unlabeled
        );
    }

    #[test]
    fn unknown_fields_warn() {
        let rec = r#"{"session_id":"a","asr_conf":0.5,"exchanges":[{"index":1,"system_start":0,"mood":"ok"}]}"#;
        let parsed = parse_session_record(rec).unwrap();
        assert_eq!(parsed.warnings.len(), 2);
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_session_record(r#"{"session_id": "a", "exchanges": [}"#) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 1);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invariant_errors() {
        let cases = [
            (r#"{"session_id":"a","exchanges":[]}"#, "no exchanges"),
            (
                r#"{"session_id":"a","exchanges":[{"index":1,"system_start":0,"user_start":3,"user_end":2}]}"#,
                "user_end before user_start",
            ),
            (
                r#"{"session_id":"a","exchanges":[{"index":1,"system_start":0,"user_barge_in":true}]}"#,
                "barge-in without user_start",
            ),
            (
                r#"{"session_id":"a","exchanges":[{"index":1,"system_start":5},{"index":2,"system_start":4}]}"#,
                "earlier than previous",
            ),
            (
                r#"{"session_id":"a","exchanges":[{"index":1,"system_start":2,"system_end":1}]}"#,
                "system_end before system_start",
            ),
        ];
        for (rec, needle) in cases {
            let err = parse_session_record(rec).unwrap_err();
            assert!(matches!(err, Error::Validation { .. }));
            assert!(err.to_string().contains(needle), "{err} vs {needle}");
        }
    }

    fn log(lines: &[&str]) -> String {
        let mut s = String::from(LOG_HEADER);
        s.push('\n');
        for l in lines {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    #[test]
    fn loads_three_records_in_order() {
        let recs: Vec<String> = ["x", "y", "z"]
            .iter()
            .map(|id| format!(r#"{{"session_id":"{id}","exchanges":[{{"index":1,"system_start":0,"user_start":1}}]}}"#))
            .collect();
        let refs: Vec<&str> = recs.iter().map(|s| s.as_str()).collect();
        let (corpus, report) = load_corpus(log(&refs).as_bytes(), "t").unwrap();
        let ids: Vec<&str> = corpus
            .sessions
            .iter()
            .map(|s| s.session_id.as_str())
            .collect();
        assert_eq!(ids, ["x", "y", "z"]);
        assert_eq!(report.accepted, 3);
        assert!(report.rejections.is_empty());
    }

    #[test]
    fn duplicate_ids_are_rejected_once() {
        let a = r#"{"session_id":"a","exchanges":[{"index":1,"system_start":0}]}"#;
        let b = r#"{"session_id":"b","exchanges":[{"index":1,"system_start":0}]}"#;
        let (corpus, report) = load_corpus(log(&[a, b, a]).as_bytes(), "t").unwrap();
        assert_eq!(corpus.sessions.len(), 2);
        assert_eq!(report.rejections.len(), 1);
        assert_eq!(report.rejections[0].line, 4);
        assert_eq!(report.accepted + report.rejections.len(), report.records);
        assert_eq!(report.no_interaction, ["a", "b"]);
    }

    #[test]
    fn header_rules() {
        assert!(matches!(
            load_corpus("".as_bytes(), "t"),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            load_corpus(format!("{LOG_HEADER}\n").as_bytes(), "t"),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            load_corpus("#expertise-log v2\n{}\n".as_bytes(), "t"),
            Err(Error::Header(_))
        ));
        assert!(matches!(
            load_corpus(r#"{"session_id":"a"}"#.as_bytes(), "t"),
            Err(Error::Header(_))
        ));
    }

    #[test]
    fn empty_corpus_distribution_is_zero() {
        assert_eq!(
            class_distribution(&Corpus::default()),
            ClassDistribution::default()
        );
    }

    #[test]
    fn write_then_load_round_trips() {
        let s = parse_session_record(two_exchange_record()).unwrap().session;
        let corpus = Corpus {
            name: "rt".into(),
            sessions: vec![s.clone()],
        };
        let mut buf = Vec::new();
        let mut echo = BTreeMap::new();
        echo.insert("seed".to_string(), "3".to_string());
        write_corpus(&corpus, &echo, &mut buf).unwrap();
        let (back, report) = load_corpus(buf.as_slice(), "rt").unwrap();
        assert_eq!(back.sessions, vec![s]);
        assert_eq!(report.comments, ["corpus=rt", "seed=3"]);
    }
}

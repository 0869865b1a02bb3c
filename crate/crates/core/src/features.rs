//! Session-level expertise features and the named feature sets.
//!
//! Thirteen features in five categories are extracted from one session:
//! interruptions, delays, durations, speech rate, and help requests. Values
//! that cannot be obtained from the log are missing, never a sentinel.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, Session};
use crate::error::{Error, Result};

/// Closed set of session features. The declaration order is the stable
/// serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureId {
    BargeInCount,
    BargeInRate,
    FirstTurnBargeIn,
    FirstTurnDelay,
    FirstTurnPositiveDelay,
    MeanUtteranceDuration,
    CallDuration,
    FirstTurnDuration,
    ExchangeCount,
    GlobalSpeechRate,
    FirstTurnSpeechRate,
    HelpRequestCount,
    FirstTurnHelp,
}

impl FeatureId {
    pub const ALL: [FeatureId; 13] = [
        FeatureId::BargeInCount,
        FeatureId::BargeInRate,
        FeatureId::FirstTurnBargeIn,
        FeatureId::FirstTurnDelay,
        FeatureId::FirstTurnPositiveDelay,
        FeatureId::MeanUtteranceDuration,
        FeatureId::CallDuration,
        FeatureId::FirstTurnDuration,
        FeatureId::ExchangeCount,
        FeatureId::GlobalSpeechRate,
        FeatureId::FirstTurnSpeechRate,
        FeatureId::HelpRequestCount,
        FeatureId::FirstTurnHelp,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureId::BargeInCount => "barge_in_count",
            FeatureId::BargeInRate => "barge_in_rate",
            FeatureId::FirstTurnBargeIn => "first_turn_barge_in",
            FeatureId::FirstTurnDelay => "first_turn_delay",
            FeatureId::FirstTurnPositiveDelay => "first_turn_positive_delay",
            FeatureId::MeanUtteranceDuration => "mean_utterance_duration",
            FeatureId::CallDuration => "call_duration",
            FeatureId::FirstTurnDuration => "first_turn_duration",
            FeatureId::ExchangeCount => "exchange_count",
            FeatureId::GlobalSpeechRate => "global_speech_rate",
            FeatureId::FirstTurnSpeechRate => "first_turn_speech_rate",
            FeatureId::HelpRequestCount => "help_request_count",
            FeatureId::FirstTurnHelp => "first_turn_help",
        }
    }

    /// Whether the feature is computed from exchange 1 alone.
    pub fn is_first_turn(self) -> bool {
        matches!(
            self,
            FeatureId::FirstTurnBargeIn
                | FeatureId::FirstTurnDelay
                | FeatureId::FirstTurnPositiveDelay
                | FeatureId::FirstTurnDuration
                | FeatureId::FirstTurnSpeechRate
                | FeatureId::FirstTurnHelp
        )
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<FeatureId> {
        FeatureId::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature `{s}`")))
    }
}

/// Named feature sets. `Selected` carries its explicit member list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSetId {
    Interruptions,
    Delays,
    Durations,
    SpeechRate,
    HelpRequests,
    FirstTurn,
    Global,
    All,
    Selected(Vec<FeatureId>),
}

impl FeatureSetId {
    /// The eight fixed sets in report order; `Selected` comes last when
    /// present.
    pub const FIXED: [FeatureSetId; 8] = [
        FeatureSetId::Interruptions,
        FeatureSetId::Delays,
        FeatureSetId::Durations,
        FeatureSetId::SpeechRate,
        FeatureSetId::HelpRequests,
        FeatureSetId::FirstTurn,
        FeatureSetId::Global,
        FeatureSetId::All,
    ];

    pub fn members(&self) -> Vec<FeatureId> {
        use FeatureId::*;
        match self {
            FeatureSetId::Interruptions => vec![BargeInCount, BargeInRate, FirstTurnBargeIn],
            FeatureSetId::Delays => vec![FirstTurnDelay, FirstTurnPositiveDelay],
            FeatureSetId::Durations => vec![
                MeanUtteranceDuration,
                CallDuration,
                FirstTurnDuration,
                ExchangeCount,
            ],
            FeatureSetId::SpeechRate => vec![GlobalSpeechRate, FirstTurnSpeechRate],
            FeatureSetId::HelpRequests => vec![HelpRequestCount, FirstTurnHelp],
            FeatureSetId::FirstTurn => FeatureId::ALL
                .iter()
                .copied()
                .filter(|f| f.is_first_turn())
                .collect(),
            FeatureSetId::Global => FeatureId::ALL
                .iter()
                .copied()
                .filter(|f| !f.is_first_turn())
                .collect(),
            FeatureSetId::All => FeatureId::ALL.to_vec(),
            FeatureSetId::Selected(list) => {
                let mut v = list.clone();
                v.sort();
                v.dedup();
                v
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureSetId::Interruptions => "Interruptions",
            FeatureSetId::Delays => "Delays",
            FeatureSetId::Durations => "Durations",
            FeatureSetId::SpeechRate => "Speech Rate",
            FeatureSetId::HelpRequests => "Help Requests",
            FeatureSetId::FirstTurn => "First Turn",
            FeatureSetId::Global => "Global",
            FeatureSetId::All => "All",
            FeatureSetId::Selected(_) => "Selected",
        }
    }
}

impl fmt::Display for FeatureSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSetId {
    type Err = Error;

    /// Accepts set names case- and separator-insensitively, plus
    /// `selected:f1,f2,...` for an explicit list.
    fn from_str(s: &str) -> Result<FeatureSetId> {
        if let Some(list) = s.strip_prefix("selected:") {
            let ids = list
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse())
                .collect::<Result<Vec<FeatureId>>>()?;
            if ids.is_empty() {
                return Err(Error::invalid("selected feature list is empty"));
            }
            return Ok(FeatureSetId::Selected(ids));
        }
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        FeatureSetId::FIXED
            .iter()
            .find(|set| {
                set.name()
                    .chars()
                    .filter(|c| c.is_ascii_alphanumeric())
                    .collect::<String>()
                    .eq_ignore_ascii_case(&key)
            })
            .cloned()
            .ok_or_else(|| Error::invalid(format!("unknown feature set `{s}`")))
    }
}

/// Things worth knowing about how a vector was obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractionNote {
    /// Exchange 1 has no user_start, so both delay features are missing.
    NoFirstTurnUserStart,
    /// Phone counts for some utterances came from the transcript heuristic.
    EstimatedPhones { utterances: usize },
    /// Utterances with phones but zero duration, excluded from speech rate.
    ZeroDurationUtterances { exchanges: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub session_id: String,
    pub label: Label,
    pub values: BTreeMap<FeatureId, Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<ExtractionNote>,
}

impl FeatureVector {
    pub fn new(session_id: impl Into<String>, label: Label) -> FeatureVector {
        FeatureVector {
            session_id: session_id.into(),
            label,
            values: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// The value of `f`; `None` both when missing and when not a member.
    pub fn get(&self, f: FeatureId) -> Option<f64> {
        self.values.get(&f).copied().flatten()
    }

    pub fn set(&mut self, f: FeatureId, v: Option<f64>) {
        self.values.insert(f, v);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.values.values().filter(|v| v.is_none()).count()
    }

    pub fn features(&self) -> Vec<FeatureId> {
        self.values.keys().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub default_first_prompt_duration: f64,
    pub help_keywords: Vec<String>,
    pub help_dtmf_key: String,
    pub phone_estimator_enabled: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            default_first_prompt_duration: 10.25,
            help_keywords: vec!["help".to_string()],
            help_dtmf_key: "0".to_string(),
            phone_estimator_enabled: false,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.default_first_prompt_duration.is_finite()
            && self.default_first_prompt_duration > 0.0)
        {
            return Err(Error::invalid(
                "default_first_prompt_duration must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interruptions {
    pub barge_in_count: u32,
    pub barge_in_rate: f64,
    pub first_turn_barge_in: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delays {
    pub first_turn_delay: Option<f64>,
    pub first_turn_positive_delay: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Durations {
    pub mean_utterance_duration: Option<f64>,
    pub call_duration: Option<f64>,
    pub first_turn_duration: Option<f64>,
    pub exchange_count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeechRate {
    pub global_speech_rate: Option<f64>,
    pub first_turn_speech_rate: Option<f64>,
    pub estimated_utterances: usize,
    pub zero_duration_exchanges: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelpRequests {
    pub help_request_count: u32,
    pub first_turn_help: bool,
}

fn no_interaction_error(session: &Session) -> Error {
    Error::Extraction {
        session: session.session_id.clone(),
        reason: "no-interaction session (user never speaks)".into(),
    }
}

pub fn extract_interruptions(session: &Session) -> Result<Interruptions> {
    if session.exchanges.is_empty() || session.is_no_interaction() {
        return Err(no_interaction_error(session));
    }
    let count = session.exchanges.iter().filter(|e| e.user_barge_in).count() as u32;
    Ok(Interruptions {
        barge_in_count: count,
        barge_in_rate: 100.0 * count as f64 / session.exchanges.len() as f64,
        first_turn_barge_in: session.exchanges[0].user_barge_in,
    })
}

/// Delay between the end of the first system prompt and the first user
/// utterance. The prompt end falls back to the session override, then to
/// the configured default prompt duration.
pub fn extract_delays(session: &Session, config: &ExtractionConfig) -> Delays {
    let Some(first) = session.exchanges.first() else {
        return Delays {
            first_turn_delay: None,
            first_turn_positive_delay: None,
        };
    };
    let Some(user_start) = first.user_start else {
        return Delays {
            first_turn_delay: None,
            first_turn_positive_delay: None,
        };
    };
    let system_end = first.system_end.unwrap_or_else(|| {
        first.system_start
            + session
                .first_system_prompt_duration
                .unwrap_or(config.default_first_prompt_duration)
    });
    let delay = user_start - system_end;
    Delays {
        first_turn_delay: Some(delay),
        first_turn_positive_delay: (delay > 0.0).then_some(delay),
    }
}

pub fn extract_durations(session: &Session) -> Durations {
    let utterances: Vec<f64> = session
        .exchanges
        .iter()
        .filter_map(|e| e.utterance_duration())
        .collect();
    let mean =
        (!utterances.is_empty()).then(|| utterances.iter().sum::<f64>() / utterances.len() as f64);

    let starts = session
        .exchanges
        .iter()
        .flat_map(|e| [Some(e.system_start), e.user_start])
        .flatten();
    let ends = session
        .exchanges
        .iter()
        .flat_map(|e| [e.system_end, e.user_end])
        .flatten();
    let min_start = starts.fold(None, |acc: Option<f64>, t| {
        Some(acc.map_or(t, |a| a.min(t)))
    });
    let max_end = ends.fold(None, |acc: Option<f64>, t| {
        Some(acc.map_or(t, |a| a.max(t)))
    });
    let call = match (min_start, max_end) {
        (Some(s), Some(e)) => Some(e - s),
        _ => None,
    };

    Durations {
        mean_utterance_duration: mean,
        call_duration: call,
        first_turn_duration: session
            .exchanges
            .first()
            .and_then(|e| e.utterance_duration()),
        exchange_count: session.exchanges.len() as u32,
    }
}

/// Approximate phone count of a transcript: `ceil(1.3 * syllables)`, where
/// each word contributes its number of maximal `[aeiouy]` groups (a
/// word-final `e` after another vowel group is silent), at least 1.
pub fn estimate_phone_count(transcript: &str) -> Result<u32> {
    let words: Vec<String> = transcript
        .split(|c: char| !c.is_alphabetic())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect();
    if words.is_empty() {
        return Err(Error::invalid(
            "cannot estimate phones of an empty transcript",
        ));
    }
    let syllables: u32 = words.iter().map(|w| word_syllables(w)).sum();
    // ceil(1.3 * s) in integer arithmetic
    Ok((13 * syllables).div_ceil(10))
}

fn word_syllables(word: &str) -> u32 {
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let chars: Vec<char> = word.chars().collect();
    let mut groups = 0u32;
    let mut in_group = false;
    for &c in &chars {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
            }
            in_group = true;
        } else {
            in_group = false;
        }
    }
    let n = chars.len();
    if groups > 1 && n >= 2 && chars[n - 1] == 'e' && !is_vowel(chars[n - 2]) {
        groups -= 1;
    }
    groups.max(1)
}

/// Per-utterance phones/second, averaged over utterances (not pooled).
pub fn extract_speech_rate(session: &Session, config: &ExtractionConfig) -> SpeechRate {
    let mut rates = Vec::new();
    let mut first = None;
    let mut estimated = 0;
    let mut zero = Vec::new();
    for (i, ex) in session.exchanges.iter().enumerate() {
        let Some(duration) = ex.utterance_duration() else {
            continue;
        };
        let phones = match ex.phone_count {
            Some(p) => Some(p),
            None if config.phone_estimator_enabled => {
                let est = ex
                    .transcript
                    .as_deref()
                    .and_then(|t| estimate_phone_count(t).ok());
                if est.is_some() {
                    estimated += 1;
                }
                est
            }
            None => None,
        };
        let Some(phones) = phones else {
            continue;
        };
        if duration <= 0.0 {
            zero.push(ex.index);
            continue;
        }
        let rate = phones as f64 / duration;
        if i == 0 {
            first = Some(rate);
        }
        rates.push(rate);
    }
    SpeechRate {
        global_speech_rate: (!rates.is_empty())
            .then(|| rates.iter().sum::<f64>() / rates.len() as f64),
        first_turn_speech_rate: first,
        estimated_utterances: estimated,
        zero_duration_exchanges: zero,
    }
}

fn is_help_exchange(ex: &crate::corpus::Exchange, config: &ExtractionConfig) -> bool {
    if ex.help_flag == Some(true) {
        return true;
    }
    if let Some(t) = &ex.transcript {
        let hit = t
            .split(|c: char| !c.is_alphabetic())
            .filter(|w| !w.is_empty())
            .any(|w| {
                let w = w.to_lowercase();
                config
                    .help_keywords
                    .iter()
                    .any(|k| k.eq_ignore_ascii_case(&w))
            });
        if hit {
            return true;
        }
    }
    match &ex.dtmf {
        Some(keys) if !config.help_dtmf_key.is_empty() => {
            keys.contains(config.help_dtmf_key.as_str())
        }
        _ => false,
    }
}

pub fn extract_help(session: &Session, config: &ExtractionConfig) -> HelpRequests {
    let flags: Vec<bool> = session
        .exchanges
        .iter()
        .map(|e| is_help_exchange(e, config))
        .collect();
    HelpRequests {
        help_request_count: flags.iter().filter(|&&f| f).count() as u32,
        first_turn_help: flags.first().copied().unwrap_or(false),
    }
}

fn bool_value(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// All thirteen features of a session. No-interaction sessions are refused.
pub fn extract_features(session: &Session, config: &ExtractionConfig) -> Result<FeatureVector> {
    config.validate()?;
    if session.is_no_interaction() {
        return Err(no_interaction_error(session));
    }
    Ok(extract_unchecked(session, config))
}

/// Extraction without the no-interaction check; used for dialog prefixes
/// in which the user has not spoken yet.
pub(crate) fn extract_unchecked(session: &Session, config: &ExtractionConfig) -> FeatureVector {
    use FeatureId::*;
    let mut v = FeatureVector::new(session.session_id.clone(), session.label);
    let n = session.exchanges.len();
    let count = session.exchanges.iter().filter(|e| e.user_barge_in).count();
    v.set(BargeInCount, Some(count as f64));
    v.set(
        BargeInRate,
        (n > 0).then(|| 100.0 * count as f64 / n as f64),
    );
    v.set(
        FirstTurnBargeIn,
        session
            .exchanges
            .first()
            .map(|e| bool_value(e.user_barge_in)),
    );

    let delays = extract_delays(session, config);
    if delays.first_turn_delay.is_none() {
        v.notes.push(ExtractionNote::NoFirstTurnUserStart);
    }
    v.set(FirstTurnDelay, delays.first_turn_delay);
    v.set(FirstTurnPositiveDelay, delays.first_turn_positive_delay);

    let d = extract_durations(session);
    v.set(MeanUtteranceDuration, d.mean_utterance_duration);
    v.set(CallDuration, d.call_duration);
    v.set(FirstTurnDuration, d.first_turn_duration);
    v.set(ExchangeCount, Some(d.exchange_count as f64));

    let sr = extract_speech_rate(session, config);
    v.set(GlobalSpeechRate, sr.global_speech_rate);
    v.set(FirstTurnSpeechRate, sr.first_turn_speech_rate);
    if sr.estimated_utterances > 0 {
        v.notes.push(ExtractionNote::EstimatedPhones {
            utterances: sr.estimated_utterances,
        });
    }
    if !sr.zero_duration_exchanges.is_empty() {
        v.notes.push(ExtractionNote::ZeroDurationUtterances {
            exchanges: sr.zero_duration_exchanges,
        });
    }

    let h = extract_help(session, config);
    v.set(HelpRequestCount, Some(h.help_request_count as f64));
    v.set(FirstTurnHelp, Some(bool_value(h.first_turn_help)));
    v
}

/// Keeps exactly the members of `set` that the vector carries.
pub fn project(vector: &FeatureVector, set: &FeatureSetId) -> Result<FeatureVector> {
    if let FeatureSetId::Selected(list) = set {
        if list.is_empty() {
            return Err(Error::invalid("Selected feature set has no members"));
        }
    }
    let members = set.members();
    Ok(FeatureVector {
        session_id: vector.session_id.clone(),
        label: vector.label,
        values: vector
            .values
            .iter()
            .filter(|(f, _)| members.contains(f))
            .map(|(f, v)| (*f, *v))
            .collect(),
        notes: vector.notes.clone(),
    })
}

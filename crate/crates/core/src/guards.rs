//! Deterministic string checks applied to every subject output: prompt
//! extraction, n-gram repetition (incoherence), stop-token detection,
//! self-reply detection, and the combined inquirer verdict.
//!
//! Everything here is pure.

use serde::{Deserialize, Serialize};

use crate::domain::{FailureKind, TerminationReason};
use crate::templates::{FamilyId, StopToken};

/// Parameters of the repetition detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawIncoherenceParams")]
pub struct IncoherenceParams {
    max_n: usize,
    repetitions: usize,
}

#[derive(Deserialize)]
struct RawIncoherenceParams {
    max_n: usize,
    repetitions: usize,
}

impl TryFrom<RawIncoherenceParams> for IncoherenceParams {
    type Error = String;
    fn try_from(raw: RawIncoherenceParams) -> Result<Self, Self::Error> {
        IncoherenceParams::new(raw.max_n, raw.repetitions)
            .ok_or_else(|| format!("max_n ({}) and repetitions ({}) must both be >= 2", raw.max_n, raw.repetitions))
    }
}

impl IncoherenceParams {
    /// `max_n` is the largest n-gram size checked, `repetitions` the number
    /// of equal n-grams that counts as a loop. Both must be at least 2.
    pub fn new(max_n: usize, repetitions: usize) -> Option<Self> {
        (max_n >= 2 && repetitions >= 2).then_some(IncoherenceParams { max_n, repetitions })
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    /// Tuned values per inquirer family: (8, 2) for llama2, (5, 2) for
    /// vicuna, (4, 2) otherwise.
    pub fn for_family(family: &FamilyId) -> Self {
        match family.as_str() {
            "llama2" => IncoherenceParams { max_n: 8, repetitions: 2 },
            "vicuna" => IncoherenceParams { max_n: 5, repetitions: 2 },
            _ => IncoherenceParams { max_n: 4, repetitions: 2 },
        }
    }
}

/// Quoted spans found in a subject output.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExtractionResult {
    pub prompts: Vec<String>,
}

impl ExtractionResult {
    pub fn count(&self) -> usize {
        self.prompts.len()
    }

    /// The first span, which is the one forwarded to the responder.
    pub fn selected(&self) -> Option<&str> {
        self.prompts.first().map(String::as_str)
    }
}

fn normalize_quotes(text: &str) -> std::borrow::Cow<'_, str> {
    const CURLY: [char; 5] = ['\u{201C}', '\u{201D}', '\u{201E}', '\u{201F}', '\u{2033}'];
    if text.contains(CURLY) {
        text.replace(CURLY, "\"").into()
    } else {
        text.into()
    }
}

/// Collects every span between a pair of double quotes, scanning left to
/// right and pairing each opening quote with the next one. Curly double
/// quotes count as ASCII quotes. Blank spans are dropped.
pub fn extract_prompt(text: &str) -> ExtractionResult {
    let text = normalize_quotes(text);
    let mut prompts = Vec::new();
    let mut open: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c != '"' {
            continue;
        }
        match open.take() {
            None => open = Some(i + 1),
            Some(start) => {
                let span = &text[start..i];
                if !span.trim().is_empty() {
                    prompts.push(span.to_string());
                }
            }
        }
    }
    ExtractionResult { prompts }
}

/// Repetition check over whitespace-separated words.
///
/// For each n in `2..=max_n`, n-grams are streamed in order. Once at least
/// `max(repetitions, n)` earlier n-grams have been seen and the newest one
/// equals its predecessor or the n-gram n positions back, the text is
/// incoherent if the last `repetitions` earlier n-grams are all equal, or if
/// the earlier n-grams sampled backwards at stride n from the last one are
/// all equal. A stride sample that would run off the start never matches.
pub fn is_incoherent(text: &str, params: IncoherenceParams) -> bool {
    let words: Vec<&str> = text.split_whitespace().collect();
    let r = params.repetitions;
    for n in 2..=params.max_n {
        if words.len() < n {
            break;
        }
        let mut grams: Vec<&[&str]> = Vec::with_capacity(words.len() + 1 - n);
        for gram in words.windows(n) {
            let seen = grams.len();
            if seen >= r.max(n) && (grams[seen - 1] == gram || grams[seen - n] == gram) {
                if all_equal(grams[seen - r..].iter()) {
                    return true;
                }
                let reach = (r - 1) * n;
                if seen > reach && all_equal((0..r).map(|k| &grams[seen - 1 - k * n])) {
                    return true;
                }
            }
            grams.push(gram);
        }
    }
    false
}

fn all_equal<'a, 'w: 'a>(mut it: impl Iterator<Item = &'a &'w [&'w str]>) -> bool {
    match it.next() {
        Some(first) => it.all(|g| g == first),
        None => false,
    }
}

fn is_edge_noise(c: char) -> bool {
    c.is_whitespace() || matches!(c, '.' | '!' | '"' | '\'' | '\u{201C}' | '\u{201D}' | '\u{2018}' | '\u{2019}')
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// True when the text, stripped of surrounding whitespace, periods,
/// exclamation marks and quotes, begins or ends with the stop literal as a
/// whole word.
pub fn is_stop(text: &str, stop: &StopToken) -> bool {
    let core = text.trim_matches(is_edge_noise);
    let literal = stop.as_str();
    let starts = core
        .strip_prefix(literal)
        .is_some_and(|rest| !rest.chars().next().is_some_and(is_word_char));
    let ends = core
        .strip_suffix(literal)
        .is_some_and(|rest| !rest.chars().next_back().is_some_and(is_word_char));
    starts || ends
}

/// True when the stop literal occurs as a whole word somewhere in the text
/// without satisfying [`is_stop`], i.e. buried mid-output where the loop
/// does not honour it.
pub fn has_embedded_stop(text: &str, stop: &StopToken) -> bool {
    if is_stop(text, stop) {
        return false;
    }
    let literal = stop.as_str();
    text.match_indices(literal).any(|(at, _)| {
        let before = text[..at].chars().next_back();
        let after = text[at + literal.len()..].chars().next();
        !before.is_some_and(is_word_char) && !after.is_some_and(is_word_char)
    })
}

/// Byte offset of the earliest responder marker in `text`.
pub fn detect_self_reply<S: AsRef<str>>(text: &str, markers: &[S]) -> Option<usize> {
    markers
        .iter()
        .map(AsRef::as_ref)
        .filter(|m| !m.is_empty())
        .filter_map(|m| text.find(m))
        .min()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortReason {
    NoPrompt,
    IncoherentInquirer,
}

impl From<AbortReason> for TerminationReason {
    fn from(r: AbortReason) -> Self {
        match r {
            AbortReason::NoPrompt => TerminationReason::NoPrompt,
            AbortReason::IncoherentInquirer => TerminationReason::IncoherentInquirer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InquirerAction {
    /// Forward the (non-empty) prompt to the responder.
    Continue(String),
    Stop,
    Abort(AbortReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InquirerVerdict {
    pub action: InquirerAction,
    pub flags: Vec<FailureKind>,
}

/// Decides what to do with one inquirer output.
///
/// Order: stop token, then incoherence over the full text, then self-reply
/// truncation (flagged, not fatal), then prompt extraction on what remains.
/// With several quoted spans the first one is used and the output flagged.
pub fn judge_inquirer_output<S: AsRef<str>>(
    text: &str,
    stop: &StopToken,
    params: IncoherenceParams,
    markers: &[S],
) -> InquirerVerdict {
    if is_stop(text, stop) {
        return InquirerVerdict { action: InquirerAction::Stop, flags: Vec::new() };
    }
    if is_incoherent(text, params) {
        return InquirerVerdict {
            action: InquirerAction::Abort(AbortReason::IncoherentInquirer),
            flags: vec![FailureKind::IncoherentInquirer],
        };
    }
    let mut flags = Vec::new();
    let kept = match detect_self_reply(text, markers) {
        Some(pos) => {
            flags.push(FailureKind::SelfReply);
            &text[..pos]
        }
        None => text,
    };
    let extraction = extract_prompt(kept);
    let action = match extraction.count() {
        0 => {
            flags.push(FailureKind::NoPrompt);
            InquirerAction::Abort(AbortReason::NoPrompt)
        }
        n => {
            if n > 1 {
                flags.push(FailureKind::MultiplePrompts);
            }
            InquirerAction::Continue(extraction.prompts.into_iter().next().unwrap_or_default())
        }
    };
    InquirerVerdict { action, flags }
}

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::allocation::{EvaluationPair, PresentationOrder};

/// Answer to "Which dialogue is artificial?"; `First` is the left dialogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    First,
    Second,
    NotSure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Confidence {
    SomewhatConfident,
    Confident,
    VeryConfident,
}

impl Confidence {
    pub const ALL: [Confidence; 3] = [Confidence::SomewhatConfident, Confidence::Confident, Confidence::VeryConfident];

    pub fn label(self) -> &'static str {
        match self {
            Confidence::SomewhatConfident => "Somewhat Confident",
            Confidence::Confident => "Confident",
            Confidence::VeryConfident => "Very Confident",
        }
    }
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl TryFrom<String> for Confidence {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        let t = s.trim();
        Confidence::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(t) || format!("{c:?}") == t)
            .ok_or_else(|| format!("unknown confidence {s:?}"))
    }
}

impl From<Confidence> for String {
    fn from(c: Confidence) -> String {
        c.label().to_string()
    }
}

/// What the evaluator submits for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentInput {
    pub participant: String,
    pub pair_id: String,
    pub choice: Choice,
    pub confidence: Confidence,
    /// 1-based index of the utterance that gave the dialogue away.
    pub decisive_utterance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub participant: String,
    pub pair_id: String,
    pub model_id: String,
    pub choice: Choice,
    pub confidence: Confidence,
    pub decisive_utterance: usize,
    pub duration_seconds: f64,
    /// The evaluator picked the simulated dialogue.
    pub detected: bool,
    /// The evaluator answered "Not sure".
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JudgmentError {
    #[error("pair {pair_id} is not allocated to {participant}")]
    NotAllocated { participant: String, pair_id: String },
    #[error("pair {pair_id} was already judged by {participant}")]
    AlreadySubmitted { participant: String, pair_id: String },
    #[error("decisive utterance {index} outside 1..={max}")]
    UtteranceOutOfRange { index: usize, max: usize },
    #[error("duration must be a non-negative number of seconds, got {0}")]
    InvalidDuration(f64),
}

/// Utterance counts of the two dialogues as shown, left first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShownLengths {
    pub left: usize,
    pub right: usize,
}

impl ShownLengths {
    /// Number of decisive-utterance options offered for the pair.
    pub fn options(self) -> usize {
        self.left.max(self.right)
    }
}

/// Validates one submission against its pair. The decisive utterance must lie
/// within the chosen dialogue; for "Not sure" the longer dialogue bounds it.
pub fn judge(
    pair: &EvaluationPair,
    lengths: ShownLengths,
    input: &JudgmentInput,
    duration_seconds: f64,
) -> Result<Judgment, JudgmentError> {
    if input.participant != pair.participant || input.pair_id != pair.pair_id {
        return Err(JudgmentError::NotAllocated { participant: input.participant.clone(), pair_id: input.pair_id.clone() });
    }
    if !(duration_seconds.is_finite() && duration_seconds >= 0.0) {
        return Err(JudgmentError::InvalidDuration(duration_seconds));
    }
    let max = match input.choice {
        Choice::First => lengths.left,
        Choice::Second => lengths.right,
        Choice::NotSure => lengths.options(),
    };
    if !(1..=max).contains(&input.decisive_utterance) {
        return Err(JudgmentError::UtteranceOutOfRange { index: input.decisive_utterance, max });
    }
    let detected = matches!(
        (input.choice, pair.order),
        (Choice::First, PresentationOrder::SimulatedLeft) | (Choice::Second, PresentationOrder::NaturalLeft)
    );
    Ok(Judgment {
        participant: input.participant.clone(),
        pair_id: input.pair_id.clone(),
        model_id: pair.model_id.clone(),
        choice: input.choice,
        confidence: input.confidence,
        decisive_utterance: input.decisive_utterance,
        duration_seconds,
        detected,
        tie: input.choice == Choice::NotSure,
    })
}

/// Append-only judgments, unique per (participant, pair).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JudgmentStore {
    entries: BTreeMap<(String, String), Judgment>,
}

impl JudgmentStore {
    pub fn insert(&mut self, judgment: Judgment) -> Result<&Judgment, JudgmentError> {
        let key = (judgment.participant.clone(), judgment.pair_id.clone());
        if self.entries.contains_key(&key) {
            return Err(JudgmentError::AlreadySubmitted { participant: key.0, pair_id: key.1 });
        }
        Ok(self.entries.entry(key).or_insert(judgment))
    }

    pub fn contains(&self, participant: &str, pair_id: &str) -> bool {
        self.entries.contains_key(&(participant.to_string(), pair_id.to_string()))
    }

    pub fn all(&self) -> impl Iterator<Item = &Judgment> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

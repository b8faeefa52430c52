use std::fmt;

use serde::{Deserialize, Serialize};

use super::goal::Goal;
use super::persona::Persona;
use super::DomainError;

/// Model id recorded for dialogues whose inquirer was a person.
pub const HUMAN_MODEL_ID: &str = "human";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Author {
    Inquirer,
    Responder,
    Human,
}

/// One subject output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub author: Author,
    pub raw_text: String,
    /// The prompt forwarded to the responder. Inquirer and human utterances only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<usize>,
}

impl Utterance {
    pub fn inquirer(raw_text: impl Into<String>, extracted_prompt: Option<String>) -> Self {
        Utterance { author: Author::Inquirer, raw_text: raw_text.into(), extracted_prompt, token_count: None }
    }

    /// Humans type the prompt directly, so the raw text is also the prompt.
    pub fn human(text: impl Into<String>) -> Self {
        let text = text.into();
        Utterance { author: Author::Human, extracted_prompt: Some(text.clone()), raw_text: text, token_count: None }
    }

    pub fn responder(raw_text: impl Into<String>) -> Self {
        Utterance { author: Author::Responder, raw_text: raw_text.into(), extracted_prompt: None, token_count: None }
    }

    /// Text the responder saw for this utterance.
    pub fn prompt(&self) -> Option<&str> {
        self.extracted_prompt.as_deref()
    }
}

/// An inquirer utterance and the responder's answer to it.
///
/// `responder` is absent only for the final turn of a dialogue that was
/// aborted after the inquirer spoke (no prompt, incoherent inquirer); the
/// failing inquirer output is kept so the guard decision can be re-derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub inquirer: Utterance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responder: Option<Utterance>,
}

impl Turn {
    pub fn is_complete(&self) -> bool {
        self.responder.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TerminationReason {
    StopToken,
    MaxTurns,
    NoPrompt,
    IncoherentInquirer,
    IncoherentResponder,
    BackendError,
    HumanEnded,
}

impl TerminationReason {
    pub const ALL: [TerminationReason; 7] = [
        TerminationReason::StopToken,
        TerminationReason::MaxTurns,
        TerminationReason::NoPrompt,
        TerminationReason::IncoherentInquirer,
        TerminationReason::IncoherentResponder,
        TerminationReason::BackendError,
        TerminationReason::HumanEnded,
    ];
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureKind {
    NoPrompt,
    MultiplePrompts,
    IncoherentInquirer,
    SelfReply,
    IncoherentResponder,
    /// Reserved for post-hoc annotation; never raised by the engine.
    StopCriterionMiss,
}

impl FailureKind {
    pub const ALL: [FailureKind; 6] = [
        FailureKind::NoPrompt,
        FailureKind::MultiplePrompts,
        FailureKind::IncoherentInquirer,
        FailureKind::SelfReply,
        FailureKind::IncoherentResponder,
        FailureKind::StopCriterionMiss,
    ];

    /// Whether the failure is counted against responder outputs rather than
    /// inquirer outputs.
    pub fn is_responder_side(self) -> bool {
        matches!(self, FailureKind::IncoherentResponder)
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FailureFlag {
    pub kind: FailureKind,
    pub turn_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    HumanCollected,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub persona: Persona,
    pub goal: Goal,
    pub turns: Vec<Turn>,
    pub termination: TerminationReason,
    #[serde(default)]
    pub failures: Vec<FailureFlag>,
    pub provenance: Provenance,
    pub inquirer_model_id: String,
    pub responder_model_id: String,
    pub seed: u64,
    /// Transport or script error that ended the dialogue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_error: Option<String>,
}

impl Dialogue {
    /// Turns with both utterances present.
    pub fn complete_turns(&self) -> usize {
        self.turns.iter().filter(|t| t.is_complete()).count()
    }

    /// Number of inquirer generations: one per recorded turn, plus the
    /// unrecorded stop-token output when the dialogue ended that way.
    pub fn inquirer_outputs(&self) -> usize {
        self.turns.len() + usize::from(self.termination == TerminationReason::StopToken)
    }

    pub fn responder_outputs(&self) -> usize {
        self.complete_turns()
    }

    /// Utterances in presentation order.
    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.turns.iter().flat_map(|t| std::iter::once(&t.inquirer).chain(t.responder.as_ref()))
    }

    pub fn utterance_count(&self) -> usize {
        self.turns.iter().map(|t| 1 + usize::from(t.is_complete())).sum()
    }

    /// Checks the structural invariants. `max_turns` is the run's turn cap,
    /// when known.
    pub fn validate(&self, max_turns: Option<usize>) -> Result<(), DomainError> {
        let bad = |msg: String| Err(DomainError::InvalidDialogue(msg));
        if let Some(cap) = max_turns {
            if self.turns.len() > cap {
                return bad(format!("{} turns exceed cap {cap}", self.turns.len()));
            }
        }
        for (i, turn) in self.turns.iter().enumerate() {
            let expected = match self.provenance {
                Provenance::HumanCollected => Author::Human,
                Provenance::Simulated => Author::Inquirer,
            };
            if turn.inquirer.author != expected {
                return bad(format!("turn {i}: inquirer slot authored by {:?}", turn.inquirer.author));
            }
            match &turn.responder {
                Some(r) if r.author != Author::Responder => {
                    return bad(format!("turn {i}: responder slot authored by {:?}", r.author));
                }
                Some(r) if r.extracted_prompt.is_some() => {
                    return bad(format!("turn {i}: responder utterance carries a prompt"));
                }
                None if i + 1 != self.turns.len() => {
                    return bad(format!("turn {i}: missing responder before the final turn"));
                }
                _ => {}
            }
        }
        if self.provenance == Provenance::HumanCollected && self.inquirer_model_id != HUMAN_MODEL_ID {
            return bad(format!("collected dialogue has inquirer model {:?}", self.inquirer_model_id));
        }
        if let Some(f) = self.failures.iter().find(|f| f.turn_index > self.turns.len()) {
            return bad(format!("flag {:?} points past the dialogue", f));
        }
        Ok(())
    }
}

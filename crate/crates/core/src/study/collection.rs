//! Live collection: a human participant plays the inquirer against the
//! responder, working through the goal queue one dialogue per goal.

use serde::{Deserialize, Serialize};

use crate::domain::{
    Dialogue, DomainError, FailureFlag, FailureKind, Goal, Persona, Provenance, TerminationReason, Turn, Utterance,
    HUMAN_MODEL_ID,
};
use crate::guards::{is_incoherent, IncoherenceParams};
use crate::subjects::{build_responder_context, BackendError, Subject, SubjectSpec};
use crate::templates::{TemplateError, TemplateSet};

/// The intake form, exactly as submitted. Every field is required.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaForm {
    pub age_group: Option<String>,
    pub gender: Option<String>,
    pub race: Option<String>,
    pub education: Option<String>,
    pub native_english: Option<bool>,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("missing form field {0}")]
    MissingField(&'static str),
    #[error(transparent)]
    InvalidField(#[from] DomainError),
    #[error("message is empty")]
    EmptyMessage,
    #[error("no active goal; the session is finished")]
    Finished,
    #[error("responder failed: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

impl PersonaForm {
    pub fn into_persona(self, id: impl Into<String>) -> Result<Persona, SessionError> {
        let age = self.age_group.ok_or(SessionError::MissingField("age_group"))?;
        let gender = self.gender.ok_or(SessionError::MissingField("gender"))?;
        let race = self.race.ok_or(SessionError::MissingField("race"))?;
        let education = self.education.ok_or(SessionError::MissingField("education"))?;
        let native_english = self.native_english.ok_or(SessionError::MissingField("native_english"))?;
        Ok(Persona {
            id: id.into(),
            age_group: age.parse()?,
            gender: gender.parse()?,
            race: race.parse()?,
            education: education.parse()?,
            native_english,
            extra_description: None,
        })
    }
}

/// How sessions reach the responder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionConfig {
    pub responder: SubjectSpec,
    pub templates: TemplateSet,
    pub responder_incoherence: IncoherenceParams,
}

impl CollectionConfig {
    pub fn new(responder: SubjectSpec) -> Self {
        let responder_incoherence = IncoherenceParams::for_family(&responder.family);
        CollectionConfig { responder, templates: TemplateSet::bundled(), responder_incoherence }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Active,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanTurnOutcome {
    pub reply: String,
    pub turn_index: usize,
    /// The reply tripped the incoherence check. It is still recorded and the
    /// participant decides whether to continue.
    pub incoherent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionSession {
    pub participant_id: String,
    pub persona: Persona,
    pub goals: Vec<Goal>,
    /// Index into `goals` of the active goal.
    pub goal_index: usize,
    pub active: Option<Dialogue>,
    pub completed: Vec<Dialogue>,
    pub status: SessionStatus,
}

impl CollectionSession {
    /// Starts a session on the first goal. The persona id is the participant id.
    pub fn open(
        participant_id: impl Into<String>,
        form: PersonaForm,
        goals: Vec<Goal>,
        responder_model_id: &str,
    ) -> Result<Self, SessionError> {
        let participant_id = participant_id.into();
        let persona = form.into_persona(participant_id.clone())?;
        let mut session = CollectionSession {
            participant_id,
            persona,
            goals,
            goal_index: 0,
            active: None,
            completed: Vec::new(),
            status: SessionStatus::Active,
        };
        session.activate(responder_model_id);
        Ok(session)
    }

    fn activate(&mut self, responder_model_id: &str) {
        match self.goals.get(self.goal_index) {
            Some(goal) => {
                self.active = Some(Dialogue {
                    persona: self.persona.clone(),
                    goal: goal.clone(),
                    turns: Vec::new(),
                    termination: TerminationReason::HumanEnded,
                    failures: Vec::new(),
                    provenance: Provenance::HumanCollected,
                    inquirer_model_id: HUMAN_MODEL_ID.to_string(),
                    responder_model_id: responder_model_id.to_string(),
                    seed: 0,
                    backend_error: None,
                });
            }
            None => {
                self.active = None;
                self.status = SessionStatus::Finished;
            }
        }
    }

    pub fn active_goal(&self) -> Option<&Goal> {
        self.active.as_ref().map(|d| &d.goal)
    }

    pub fn remaining_goals(&self) -> usize {
        self.goals.len().saturating_sub(self.goal_index)
    }

    /// Records the participant's message and the responder's reply as one
    /// turn. If the responder fails nothing is recorded.
    pub async fn post_human_message(
        &mut self,
        text: &str,
        responder: &mut dyn Subject,
        cfg: &CollectionConfig,
    ) -> Result<HumanTurnOutcome, SessionError> {
        if text.trim().is_empty() {
            return Err(SessionError::EmptyMessage);
        }
        let family = cfg.templates.family(&cfg.responder.family)?;
        let dialogue = self.active.as_mut().ok_or(SessionError::Finished)?;
        let context = build_responder_context(&dialogue.turns, family, text, cfg.responder.format)?;
        let reply = responder.complete(&context).await?;
        let incoherent = is_incoherent(&reply, cfg.responder_incoherence);
        let turn_index = dialogue.turns.len();
        dialogue.turns.push(Turn { inquirer: Utterance::human(text), responder: Some(Utterance::responder(reply.clone())) });
        if incoherent {
            dialogue.failures.push(FailureFlag { kind: FailureKind::IncoherentResponder, turn_index });
        }
        Ok(HumanTurnOutcome { reply, turn_index, incoherent })
    }

    /// Closes the active dialogue as `HumanEnded` and moves to the next goal.
    /// A dialogue without any turn is discarded rather than recorded.
    /// Returns the closed dialogue, if one was recorded.
    pub fn next_goal(&mut self) -> Result<Option<&Dialogue>, SessionError> {
        let dialogue = self.active.take().ok_or(SessionError::Finished)?;
        let responder_model_id = dialogue.responder_model_id.clone();
        let recorded = !dialogue.turns.is_empty();
        if recorded {
            self.completed.push(dialogue);
        }
        self.goal_index += 1;
        self.activate(&responder_model_id);
        Ok(if recorded { self.completed.last() } else { None })
    }
}

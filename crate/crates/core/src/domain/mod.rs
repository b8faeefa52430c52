//! Personas, goals, and the dialogue record shared by every other module.

mod dialogue;
mod goal;
mod persona;

pub use dialogue::{
    Author, Dialogue, FailureFlag, FailureKind, Provenance, TerminationReason, Turn, Utterance, HUMAN_MODEL_ID,
};
pub use goal::{load_goal_set, load_persona_set, parse_goal_set, parse_persona_set, FixtureSource, Goal, GoalDomain};
pub use persona::{
    render_persona, AgeGroup, Education, Gender, Persona, Race, PERSONA_TEMPLATE_VERSION, RACE_OPTIONS,
};

#[derive(Debug, thiserror::Error)]
pub enum DomainError {
    #[error("invalid {field}: {value:?}")]
    InvalidOption { field: &'static str, value: String },
    #[error("failed to read fixture {path}")]
    FixtureIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse fixture {origin}: {message}")]
    FixtureParse { origin: String, message: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("goal {0:?} has empty text")]
    EmptyGoalText(String),
    #[error("invalid dialogue: {0}")]
    InvalidDialogue(String),
}

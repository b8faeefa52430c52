//! Simulated user/chatbot dialogues: an inquirer model embodies a persona
//! with a goal and converses with a responder model under deterministic
//! guards. Also provides dialogue analytics and the data model behind human
//! collection and Turing-style evaluation.

pub mod analytics;
pub mod domain;
pub mod engine;
pub mod guards;
pub mod study;
pub mod subjects;
pub mod summary;
pub mod templates;

pub use analytics::{compute_stats, DialogueRecord, StatsConfig, StatsReport};
pub use domain::{
    Dialogue, FailureFlag, FailureKind, Goal, GoalDomain, Persona, Provenance, TerminationReason, Turn, Utterance,
};
pub use engine::{run_batch, run_dialogue, run_dialogue_with, DialogueSetup, EngineConfig, EngineError, RunManifest};
pub use guards::{extract_prompt, is_incoherent, is_stop, IncoherenceParams};
pub use subjects::{Subject, SubjectRole, SubjectSpec};
pub use templates::{FamilyId, StopToken, TemplateFamily, TemplateSet};
pub use summary::Summary;

//! Human studies: live collection sessions with a human inquirer, and
//! side-by-side evaluation of natural versus simulated dialogues.

mod allocation;
mod collection;
mod judgment;
mod report;

pub use allocation::{
    allocate_pairs, max_feasible_pairs, AllocationError, BindingConstraint, EvaluationPair, NaturalRef,
    PresentationOrder, SimulatedRef,
};
pub use collection::{
    CollectionConfig, CollectionSession, HumanTurnOutcome, PersonaForm, SessionError, SessionStatus,
};
pub use judgment::{judge, Choice, Confidence, Judgment, JudgmentError, JudgmentInput, JudgmentStore, ShownLengths};
pub use report::{
    render_undetectability_table, undetectability_report, EmptyReport, ModelUndetectability, Stratum,
    UndetectabilityReport, OVERALL,
};

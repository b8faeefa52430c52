//! The roleplay loop: an inquirer model playing a persona talks to a
//! responder until it emits the stop token, fails a guard, or hits the
//! turn cap.

mod batch;

use serde::{Deserialize, Serialize};

pub use batch::{grid, run_batch, BatchError, DialogueSink, GridCell, RunManifest, VecSink};

use crate::domain::{
    Dialogue, FailureFlag, FailureKind, Goal, Persona, Provenance, TerminationReason, Turn, Utterance,
};
use crate::guards::{is_incoherent, judge_inquirer_output, IncoherenceParams, InquirerAction};
use crate::subjects::{build_inquirer_context, build_responder_context, Subject, SubjectSpec};
use crate::templates::{FamilyId, StopToken, TemplateError, TemplateFamily, TemplateSet};

pub const DEFAULT_MAX_TURNS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub max_turns: usize,
    pub stop: StopToken,
    pub inquirer_incoherence: IncoherenceParams,
    pub responder_incoherence: IncoherenceParams,
    /// Store the inquirer's unextracted output; otherwise only the prompt is kept.
    pub record_raw: bool,
    pub templates: TemplateSet,
}

impl EngineConfig {
    /// Defaults with incoherence parameters tuned for the given families.
    pub fn for_families(inquirer: &FamilyId, responder: &FamilyId) -> Self {
        EngineConfig {
            max_turns: DEFAULT_MAX_TURNS,
            stop: StopToken::default(),
            inquirer_incoherence: IncoherenceParams::for_family(inquirer),
            responder_incoherence: IncoherenceParams::for_family(responder),
            record_raw: true,
            templates: TemplateSet::bundled(),
        }
    }

    pub fn for_specs(inquirer: &SubjectSpec, responder: &SubjectSpec) -> Self {
        Self::for_families(&inquirer.family, &responder.family)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.max_turns == 0 {
            return Err(EngineError::InvalidConfig("max_turns must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything fixed for one dialogue besides the subjects themselves.
#[derive(Debug, Clone, Copy)]
pub struct DialogueSetup<'a> {
    pub inquirer: &'a SubjectSpec,
    pub responder: &'a SubjectSpec,
    pub persona: &'a Persona,
    pub goal: &'a Goal,
    pub seed: u64,
}

struct Resolved<'a> {
    inquirer_family: &'a TemplateFamily,
    responder_family: &'a TemplateFamily,
    markers: Vec<String>,
}

fn resolve<'a>(setup: &DialogueSetup<'_>, cfg: &'a EngineConfig) -> Result<Resolved<'a>, EngineError> {
    cfg.validate()?;
    let inquirer_family = cfg.templates.family(&setup.inquirer.family)?;
    let responder_family = cfg.templates.family(&setup.responder.family)?;
    let markers = setup.responder.markers.clone().unwrap_or_else(|| responder_family.self_reply_markers.clone());
    // fail on template problems before any model call
    inquirer_family.render_sys_i(&setup.persona.render(), &setup.goal.text, &cfg.stop)?;
    Ok(Resolved { inquirer_family, responder_family, markers })
}

fn empty_dialogue(setup: &DialogueSetup<'_>) -> Dialogue {
    Dialogue {
        persona: setup.persona.clone(),
        goal: setup.goal.clone(),
        turns: Vec::new(),
        termination: TerminationReason::MaxTurns,
        failures: Vec::new(),
        provenance: Provenance::Simulated,
        inquirer_model_id: setup.inquirer.model_id(),
        responder_model_id: setup.responder.model_id(),
        seed: setup.seed,
        backend_error: None,
    }
}

/// Runs one dialogue with subjects built from the specs in `setup`.
///
/// Only configuration problems are errors; model and transport failures end
/// the dialogue with [`TerminationReason::BackendError`].
pub async fn run_dialogue(setup: &DialogueSetup<'_>, cfg: &EngineConfig) -> Result<Dialogue, EngineError> {
    resolve(setup, cfg)?;
    let subjects = setup
        .inquirer
        .instantiate(setup.seed)
        .and_then(|i| setup.responder.instantiate(setup.seed).map(|r| (i, r)));
    match subjects {
        Ok((mut inquirer, mut responder)) => run_dialogue_with(&mut *inquirer, &mut *responder, setup, cfg).await,
        Err(e) => {
            let mut dialogue = empty_dialogue(setup);
            dialogue.termination = TerminationReason::BackendError;
            dialogue.backend_error = Some(e.to_string());
            Ok(dialogue)
        }
    }
}

/// Runs one dialogue against caller-supplied subjects.
pub async fn run_dialogue_with(
    inquirer: &mut dyn Subject,
    responder: &mut dyn Subject,
    setup: &DialogueSetup<'_>,
    cfg: &EngineConfig,
) -> Result<Dialogue, EngineError> {
    let resolved = resolve(setup, cfg)?;
    let mut dialogue = empty_dialogue(setup);
    let termination = loop {
        let t = dialogue.turns.len();
        if t >= cfg.max_turns {
            break TerminationReason::MaxTurns;
        }
        let context = build_inquirer_context(
            setup.persona,
            setup.goal,
            &dialogue.turns,
            resolved.inquirer_family,
            &cfg.stop,
            setup.inquirer.format,
        )?;
        let raw = match inquirer.complete(&context).await {
            Ok(raw) => raw,
            Err(e) => {
                dialogue.backend_error = Some(e.to_string());
                break TerminationReason::BackendError;
            }
        };
        let verdict = judge_inquirer_output(&raw, &cfg.stop, cfg.inquirer_incoherence, &resolved.markers);
        let flags: Vec<FailureFlag> =
            verdict.flags.iter().map(|&kind| FailureFlag { kind, turn_index: t }).collect();
        let prompt = match verdict.action {
            InquirerAction::Stop => break TerminationReason::StopToken,
            InquirerAction::Abort(reason) => {
                dialogue.turns.push(Turn { inquirer: Utterance::inquirer(raw, None), responder: None });
                dialogue.failures.extend(flags);
                break reason.into();
            }
            InquirerAction::Continue(prompt) => prompt,
        };
        let context = build_responder_context(&dialogue.turns, resolved.responder_family, &prompt, setup.responder.format)?;
        let reply = match responder.complete(&context).await {
            Ok(reply) => reply,
            Err(e) => {
                // the half-finished turn and its flags are dropped
                dialogue.backend_error = Some(e.to_string());
                break TerminationReason::BackendError;
            }
        };
        let incoherent = is_incoherent(&reply, cfg.responder_incoherence);
        let raw_text = if cfg.record_raw { raw } else { prompt.clone() };
        dialogue.turns.push(Turn {
            inquirer: Utterance::inquirer(raw_text, Some(prompt)),
            responder: Some(Utterance::responder(reply)),
        });
        dialogue.failures.extend(flags);
        if incoherent {
            dialogue.failures.push(FailureFlag { kind: FailureKind::IncoherentResponder, turn_index: t });
            break TerminationReason::IncoherentResponder;
        }
    };
    dialogue.termination = termination;
    Ok(dialogue)
}
